#include "semalloc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace semalloc::cli {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, std::string_view message) {
  throw ConfigError(fmt::format("{}: {}", path, message));
}

// Object reader that tracks the JSON path and rejects unconsumed keys.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string child(const std::string& key) const { return path_ + "." + key; }
  const std::string& path() const { return path_; }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? as_number(at(key), child(key)) : fallback;
  }

  std::string string(const std::string& key, std::string fallback) {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_string()) fail(child(key), "expected a string");
    return v.get<std::string>();
  }

  std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_number_unsigned()) fail(child(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_array()) fail(child(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(as_number(v[i], fmt::format("{}[{}]", child(key), i)));
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(child(key), "unknown key");
    }
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto parse_enum(const std::string& path, const std::string& text, F&& parse) {
  try {
    return parse(text);
  } catch (const std::exception&) {
    fail(path, fmt::format("unrecognized value '{}'", text));
  }
}

ForwardShape read_shape(Node node) {
  ForwardShape s;
  s.midpoint = node.number("midpoint", s.midpoint);
  s.steepness = node.number("steepness", s.steepness);
  s.floor = node.number("floor", s.floor);
  node.finish();
  return s;
}

// {"CLIP": x, "MSSSIM": y} keyed by metric name.
template <class T, class F>
void read_per_metric(Node& parent, const std::string& key, std::array<T, 2>& out, F&& read) {
  if (!parent.has(key)) return;
  Node node(parent.at(key), parent.child(key));
  for (Metric m : {Metric::Clip, Metric::MsSsim}) {
    const std::string name(to_string(m));
    if (node.has(name)) out[static_cast<int>(m)] = read(node.at(name), node.child(name));
  }
  node.finish();
}

StreamProfile read_stream(const json& j, const std::string& path) {
  Node node(j, path);
  StreamProfile s;
  s.name = node.string("name", "");
  if (s.name.empty()) fail(node.child("name"), "required");
  if (!node.has("k_bits")) fail(node.child("k_bits"), "required");
  if (!node.has("n_symbols")) fail(node.child("n_symbols"), "required");
  s.k_bits = node.number("k_bits", 0.0);
  s.n_symbols = node.number("n_symbols", 0.0);
  if (!node.has("semantic_value")) fail(node.child("semantic_value"), "required");
  read_per_metric(node, "semantic_value", s.semantic_value,
                  [](const json& v, const std::string& p) { return Node::as_number(v, p); });
  read_per_metric(node, "forward_shape", s.forward_shape,
                  [](const json& v, const std::string& p) { return read_shape(Node(v, p)); });
  node.finish();
  return s;
}

MetricPreset read_preset(const json& j, const std::string& path, MetricPreset base) {
  Node node(j, path);
  base.p_best = node.number("p_best", base.p_best);
  base.p_worst_uncoded = node.number("p_worst_uncoded", base.p_worst_uncoded);
  base.p_worst_stream = node.numbers("p_worst_stream", base.p_worst_stream);
  if (node.has("subsets")) {
    Node subsets(node.at("subsets"), node.child("subsets"));
    base.subset_overrides.clear();
    for (const auto& [key, value] : j.at("subsets").items()) {
      unsigned mask = 0;
      std::size_t used = 0;
      try {
        mask = static_cast<unsigned>(std::stoul(key, &used));
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != key.size()) fail(subsets.child(key), "subset keys are decimal bitmasks");
      base.subset_overrides[mask] = subsets.number(key, 0.0);
    }
    subsets.finish();
  }
  node.finish();
  return base;
}

link::ChannelParams read_channel(const json& j, const std::string& path) {
  Node node(j, path);
  link::ChannelParams c;
  c.distance_m = node.number("distance_m", c.distance_m);
  c.reference_distance_m = node.number("reference_distance_m", c.reference_distance_m);
  c.reference_path_loss_db = node.number("reference_path_loss_db", c.reference_path_loss_db);
  c.path_loss_exponent = node.number("path_loss_exponent", c.path_loss_exponent);
  c.noise_dbm = node.number("noise_dbm", c.noise_dbm);
  if (node.has("fading")) {
    const auto& f = node.at("fading");
    const auto fpath = node.child("fading");
    if (f.is_string()) {
      if (f.get<std::string>() != "rayleigh") fail(fpath, "expected \"rayleigh\" or {\"fixed\": [...]}");
      c.fading = link::RayleighFading{};
    } else {
      Node fixed(f, fpath);
      if (!fixed.has("fixed")) fail(fpath, "expected \"rayleigh\" or {\"fixed\": [...]}");
      c.fading = link::FixedFading{fixed.numbers("fixed", {})};
      fixed.finish();
    }
  }
  node.finish();
  return c;
}

AllocOptions read_alloc(const json& j, const std::string& path) {
  Node node(j, path);
  AllocOptions a;
  a.snr_cap = node.number("snr_cap", a.snr_cap);
  a.bisection_tol = node.number("bisection_tol", a.bisection_tol);
  a.scan_points = static_cast<int>(node.unsigned_int("scan_points", a.scan_points));
  node.finish();
  return a;
}

sim::ExperimentSpec read_experiment(const json& j, const std::string& path,
                                    const ConfigDocument& doc) {
  Node node(j, path);
  sim::ExperimentSpec e;
  e.name = node.string("name", "");
  if (e.name.empty()) fail(node.child("name"), "required");
  const auto kind = node.string("kind", "");
  e.kind = parse_enum(node.child("kind"), kind, sim::parse_kind);
  e.scheme = parse_enum(node.child("scheme"), node.string("scheme", std::string(to_string(doc.scheme))),
                        parse_scheme);
  e.metric = parse_enum(node.child("metric"), node.string("metric", std::string(to_string(doc.metric))),
                        parse_metric);
  e.p_bar_grid = node.numbers("p_bar_grid", {});
  e.power_budget_grid = node.numbers("power_budget_grid", {});
  e.n_realizations = node.unsigned_int("n_realizations", e.n_realizations);
  e.seed = node.unsigned_int("seed", e.seed);
  e.threads = static_cast<unsigned>(node.unsigned_int("threads", e.threads));
  if (node.has("methods")) {
    const auto& m = node.at("methods");
    const auto mpath = node.child("methods");
    if (!m.is_array()) fail(mpath, "expected an array of method names");
    e.methods.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto ipath = fmt::format("{}[{}]", mpath, i);
      if (!m[i].is_string()) fail(ipath, "expected a string");
      e.methods.push_back(parse_enum(ipath, m[i].get<std::string>(), parse_method));
    }
  }
  if (node.has("link")) {
    Node l(node.at("link"), node.child("link"));
    e.link.ber_grid = l.numbers("ber_grid", e.link.ber_grid);
    e.link.n_blocks = l.unsigned_int("n_blocks", e.link.n_blocks);
    e.link.block_bits = l.unsigned_int("block_bits", e.link.block_bits);
    e.link.mixture_ber = l.number("mixture_ber", e.link.mixture_ber);
    l.finish();
  }
  node.finish();
  try {
    e.validate();
  } catch (const std::invalid_argument& ex) {
    fail(path, ex.what());
  }
  return e;
}

json shape_json(const ForwardShape& s) {
  return {{"midpoint", s.midpoint}, {"steepness", s.steepness}, {"floor", s.floor}};
}

json stream_json(const StreamProfile& s) {
  json sv = json::object();
  json fs = json::object();
  for (Metric m : {Metric::Clip, Metric::MsSsim}) {
    sv[std::string(to_string(m))] = s.semantic(m);
    fs[std::string(to_string(m))] = shape_json(s.shape(m));
  }
  return {{"name", s.name},
          {"k_bits", s.k_bits},
          {"n_symbols", s.n_symbols},
          {"semantic_value", sv},
          {"forward_shape", fs}};
}

json preset_json(const MetricPreset& p) {
  json j = {{"p_best", p.p_best}, {"p_worst_uncoded", p.p_worst_uncoded}};
  if (!p.p_worst_stream.empty()) j["p_worst_stream"] = p.p_worst_stream;
  if (!p.subset_overrides.empty()) {
    json subsets = json::object();
    for (const auto& [mask, value] : p.subset_overrides) subsets[std::to_string(mask)] = value;
    j["subsets"] = subsets;
  }
  return j;
}

json channel_json(const link::ChannelParams& c) {
  json j = {{"distance_m", c.distance_m},
            {"reference_distance_m", c.reference_distance_m},
            {"reference_path_loss_db", c.reference_path_loss_db},
            {"path_loss_exponent", c.path_loss_exponent},
            {"noise_dbm", c.noise_dbm}};
  if (const auto* fixed = std::get_if<link::FixedFading>(&c.fading)) {
    j["fading"] = {{"fixed", fixed->gain_sq}};
  } else {
    j["fading"] = "rayleigh";
  }
  return j;
}

json experiment_json(const sim::ExperimentSpec& e) {
  json methods = json::array();
  for (Method m : e.methods) methods.push_back(std::string(to_string(m)));
  json j = {{"name", e.name},
            {"kind", std::string(sim::to_string(e.kind))},
            {"scheme", std::string(to_string(e.scheme))},
            {"metric", std::string(to_string(e.metric))},
            {"n_realizations", e.n_realizations},
            {"seed", e.seed},
            {"threads", e.threads},
            {"methods", methods}};
  if (!e.p_bar_grid.empty()) j["p_bar_grid"] = e.p_bar_grid;
  if (!e.power_budget_grid.empty()) j["power_budget_grid"] = e.power_budget_grid;
  if (e.kind == sim::ExperimentKind::LinkValidate) {
    j["link"] = {{"ber_grid", e.link.ber_grid},
                 {"n_blocks", e.link.n_blocks},
                 {"block_bits", e.link.block_bits},
                 {"mixture_ber", e.link.mixture_ber}};
  }
  return j;
}

}  // namespace

void ConfigDocument::validate() const {
  if (max_ber != kMaxBer) {
    fail("$.max_ber", fmt::format("must be {} (BPSK with hard decisions); got {}", kMaxBer, max_ber));
  }
  try {
    channel.validate();
  } catch (const std::exception& e) {
    fail("$.channel", e.what());
  }
  if (const auto* fixed = std::get_if<link::FixedFading>(&channel.fading)) {
    if (fixed->gain_sq.size() != streams.size()) {
      fail("$.channel.fading.fixed", "needs one gain per stream");
    }
  }
  for (Scheme s : {Scheme::UncodedForward, Scheme::CodedDiscard}) {
    for (Metric m : {Metric::Clip, Metric::MsSsim}) {
      try {
        PerceptionModel(s, presets[static_cast<int>(m)], streams);
      } catch (const std::exception& e) {
        fail(fmt::format("$.perception.{}", to_string(m)), e.what());
      }
    }
  }
  if (!(alloc.snr_cap > 0.0) || !(alloc.bisection_tol > 0.0) || alloc.scan_points < 2) {
    fail("$.allocation", "snr_cap and bisection_tol must be positive, scan_points >= 2");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    const auto path = fmt::format("$.experiments[{}]", i);
    if (!names.insert(experiments[i].name).second) fail(path, "duplicate experiment name");
    try {
      experiments[i].validate();
    } catch (const std::invalid_argument& e) {
      fail(path, e.what());
    }
  }
}

sim::SimContext ConfigDocument::context() const {
  sim::SimContext ctx;
  ctx.streams = streams;
  ctx.channel = channel;
  ctx.presets = presets;
  ctx.alloc = alloc;
  return ctx;
}

PerceptionModel ConfigDocument::model() const {
  return PerceptionModel(scheme, presets[static_cast<int>(metric)], streams);
}

const sim::ExperimentSpec& ConfigDocument::experiment(std::string_view name) const {
  for (const auto& e : experiments) {
    if (e.name == name) return e;
  }
  throw ConfigError(fmt::format("$.experiments: no experiment named '{}'", name));
}

ConfigDocument default_config() { return ConfigDocument{}; }

ConfigDocument parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("$: invalid JSON at byte {}: {}", e.byte, e.what()));
  }
  Node node(root, "$");
  ConfigDocument doc;
  doc.metric = parse_enum("$.metric", node.string("metric", std::string(to_string(doc.metric))),
                          parse_metric);
  doc.scheme = parse_enum("$.scheme", node.string("scheme", std::string(to_string(doc.scheme))),
                          parse_scheme);
  doc.max_ber = node.number("max_ber", doc.max_ber);
  if (doc.max_ber != kMaxBer) {
    fail("$.max_ber", fmt::format("must be {} (BPSK with hard decisions); got {}", kMaxBer, doc.max_ber));
  }
  if (node.has("streams")) {
    const auto& s = node.at("streams");
    if (!s.is_array()) fail("$.streams", "expected an array");
    doc.streams.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      doc.streams.push_back(read_stream(s[i], fmt::format("$.streams[{}]", i)));
    }
  }
  if (node.has("channel")) doc.channel = read_channel(node.at("channel"), "$.channel");
  if (node.has("perception")) {
    Node p(node.at("perception"), "$.perception");
    for (Metric m : {Metric::Clip, Metric::MsSsim}) {
      const std::string name(to_string(m));
      if (p.has(name)) {
        auto& preset = doc.presets[static_cast<int>(m)];
        preset = read_preset(p.at(name), p.child(name), preset);
      }
    }
    p.finish();
  }
  if (node.has("allocation")) doc.alloc = read_alloc(node.at("allocation"), "$.allocation");
  if (node.has("experiments")) {
    const auto& ex = node.at("experiments");
    if (!ex.is_array()) fail("$.experiments", "expected an array");
    for (std::size_t i = 0; i < ex.size(); ++i) {
      doc.experiments.push_back(read_experiment(ex[i], fmt::format("$.experiments[{}]", i), doc));
    }
  }
  node.finish();
  doc.validate();
  return doc;
}

ConfigDocument load_config(const std::filesystem::path& path) {
  const auto text = read_file(path);
  try {
    return parse_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string serialize_config(const ConfigDocument& doc) {
  json streams = json::array();
  for (const auto& s : doc.streams) streams.push_back(stream_json(s));
  json perception = json::object();
  for (Metric m : {Metric::Clip, Metric::MsSsim}) {
    perception[std::string(to_string(m))] = preset_json(doc.presets[static_cast<int>(m)]);
  }
  json experiments = json::array();
  for (const auto& e : doc.experiments) experiments.push_back(experiment_json(e));
  const json root = {{"metric", std::string(to_string(doc.metric))},
                     {"scheme", std::string(to_string(doc.scheme))},
                     {"max_ber", doc.max_ber},
                     {"streams", streams},
                     {"channel", channel_json(doc.channel)},
                     {"perception", perception},
                     {"allocation",
                      {{"snr_cap", doc.alloc.snr_cap},
                       {"bisection_tol", doc.alloc.bisection_tol},
                       {"scan_points", doc.alloc.scan_points}}},
                     {"experiments", experiments}};
  return root.dump(2) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("error reading '{}'", path.string()));
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw IoError(fmt::format("error writing '{}'", path.string()));
}

}  // namespace semalloc::cli
