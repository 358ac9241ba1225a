#include "semalloc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "semalloc/alloc.hpp"
#include "semalloc/config.hpp"
#include "semalloc/errors.hpp"
#include "semalloc/rng.hpp"
#include "semalloc/simkit.hpp"
#include "semalloc/validate.hpp"

#ifndef SEMALLOC_DEFAULT_CONFIG
#define SEMALLOC_DEFAULT_CONFIG "configs/default.json"
#endif

namespace semalloc::cli {
namespace {

std::string num(double x) { return fmt::format("{:.9g}", x); }

struct LoadedConfig {
  ConfigDocument doc;
  std::string text;
};

LoadedConfig load(const std::optional<std::filesystem::path>& path) {
  const auto p = path.value_or(default_config_path());
  LoadedConfig loaded;
  loaded.text = read_file(p);
  try {
    loaded.doc = parse_config(loaded.text);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", p.string(), e.what()));
  }
  return loaded;
}

// Runs `body`, mapping exceptions onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const IoError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitIo;
  } catch (const UsageError& e) {
    fmt::print(err, "usage error: {}\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    fmt::print(err, "invalid config: {}\n", e.what());
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitFailure;
  }
}

std::vector<Method> methods_from_flag(std::string_view flag) {
  if (flag == "all") return {Method::Unaware, Method::Proportional, Method::Bisection};
  try {
    return {parse_method(flag)};
  } catch (const std::exception&) {
    throw UsageError(
        fmt::format("--method '{}' (expected unaware|proportional|bisection|all)", flag));
  }
}

std::string dbm(double watts) { return watts > 0.0 ? num(link::watts_to_dbm(watts)) : "-inf"; }

}  // namespace

std::filesystem::path default_config_path() { return SEMALLOC_DEFAULT_CONFIG; }

std::vector<double> parse_gain_list(std::string_view text) {
  std::vector<double> gains;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = std::string(text.substr(start, comma == std::string_view::npos ? text.npos
                                                                                       : comma - start));
    std::size_t used = 0;
    double g = 0.0;
    try {
      g = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(g) || g <= 0.0) {
      throw UsageError(fmt::format("--fixed-gains: '{}' is not a positive number", item));
    }
    gains.push_back(g);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return gains;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

int cmd_allocate(const AllocateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto methods = methods_from_flag(args.method);
    const auto cfg = load(args.config);
    const auto& doc = cfg.doc;
    const auto model = doc.model();

    link::ChannelRealization real;
    std::string source;
    if (args.fixed_gains) {
      if (args.fixed_gains->size() != model.size()) {
        throw UsageError(fmt::format("--fixed-gains needs {} values, got {}", model.size(),
                                     args.fixed_gains->size()));
      }
      real = link::fixed_realization(doc.channel, *args.fixed_gains);
      source = "fixed";
    } else {
      auto rng = rng_stream(args.seed, 0);
      real = link::draw_realization(doc.channel, model.size(), rng);
      source = fmt::format("seed {}", args.seed);
    }

    fmt::print(out, "scheme {}  metric {}  p_bar {}\n", to_string(model.scheme()),
               to_string(model.metric()), num(args.p_bar));
    for (std::size_t i = 0; i < model.size(); ++i) {
      fmt::print(out, "stream {} ({}): |h|^2 {} ({})\n", i, model.stream(i).name,
                 num(real.gain_sq[i]), source);
    }

    std::string csv = "method,stream,power_w,power_dbm,error,snr,capacity,achieved_p,total_power\n";
    int status = kExitOk;
    for (Method method : methods) {
      const AllocationProblem problem{model, real, args.p_bar};
      AllocationResult r;
      try {
        r = allocate(method, problem, doc.alloc);
      } catch (const InfeasibleError&) {
        fmt::print(err, "{}: {}\n", to_string(method),
                   feasibility_report(problem).describe(args.p_bar));
        status = kExitFailure;
        continue;
      }
      fmt::print(out, "\n[{}]\n", to_string(method));
      for (std::size_t i = 0; i < model.size(); ++i) {
        const double cap = std::log2(1.0 + r.snr[i]);
        fmt::print(out, "  stream {}: q = {} W ({} dBm)  error {}  snr {}  capacity {}\n", i,
                   num(r.power_w[i]), dbm(r.power_w[i]), num(r.error[i]), num(r.snr[i]), num(cap));
        csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(method), i, num(r.power_w[i]),
                           dbm(r.power_w[i]), num(r.error[i]), num(r.snr[i]), num(cap),
                           num(r.achieved_p), num(r.total_power));
      }
      fmt::print(out, "  achieved perception {}\n  total power {} W ({} dBm)\n", num(r.achieved_p),
                 num(r.total_power), dbm(r.total_power));
      if (r.zero_power) fmt::print(out, "  note: constraint met with every stream switched off\n");
      if (r.near_infeasible) {
        fmt::print(err, "warning: {}: p_bar {} is at the edge of feasibility; SNR capped at {}\n",
                   to_string(method), num(args.p_bar), num(doc.alloc.snr_cap));
      }
    }
    if (args.csv) write_file(*args.csv, csv);
    return status;
  });
}

int cmd_experiment(const ExperimentArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = load(args.config);
    std::vector<sim::ExperimentSpec> specs;
    if (args.name) {
      try {
        specs.push_back(cfg.doc.experiment(*args.name));
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
    } else {
      specs = cfg.doc.experiments;
    }
    if (specs.empty()) throw UsageError("config has no experiments");

    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", args.out_dir.string(), ec.message()));

    const auto ctx = cfg.doc.context();
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    int status = kExitOk;
    for (auto spec : specs) {
      if (args.seed) spec.seed = *args.seed;
      const auto dir = args.name ? args.out_dir : args.out_dir / spec.name;
      std::filesystem::create_directories(dir, ec);
      if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
      const auto file = dir / sim::csv_file_name(spec.kind);

      std::string csv;
      if (spec.kind == sim::ExperimentKind::LinkValidate) {
        const auto report = sim::run_link_validate(ctx, spec);
        csv = sim::to_csv(report);
        if (!report.passed()) {
          fmt::print(err, "{}: link validation checks failed (see {})\n", spec.name, file.string());
          status = kExitFailure;
        }
      } else {
        csv = sim::run_to_csv(ctx, spec);
      }
      write_file(file, csv);
      fmt::print(out, "{}: wrote {}\n", spec.name, file.string());
      runs.push_back({{"name", spec.name},
                      {"kind", std::string(sim::to_string(spec.kind))},
                      {"seed", spec.seed},
                      {"n_realizations", spec.n_realizations},
                      {"file", std::filesystem::relative(file, args.out_dir).generic_string()}});
    }
    const nlohmann::ordered_json manifest = {{"tool", "semalloc"},
                                             {"tool_version", std::string(kToolVersion)},
                                             {"config_sha256", sha256_hex(cfg.text)},
                                             {"experiments", runs}};
    write_file(args.out_dir / "manifest.json", manifest.dump(2) + "\n");
    return status;
  });
}

int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = load(args.config);
    if (args.suite) {
      const auto& names = suite_names();
      if (std::find(names.begin(), names.end(), *args.suite) == names.end()) {
        throw UsageError(fmt::format("--suite '{}' (expected one of: {})", *args.suite,
                                     fmt::join(names, ", ")));
      }
    }
    const auto results = run_suites(cfg.doc, args.suite);
    bool ok = true;
    for (const auto& r : results) {
      fmt::print(out, "{:<11} {}  checks {:>4}  max residual/tol {}{}\n", r.name,
                 r.passed ? "PASS" : "FAIL", r.checks, num(r.max_residual),
                 r.worst_check.empty() ? "" : fmt::format("  ({})", r.worst_check));
      ok = ok && r.passed;
    }
    return ok ? kExitOk : kExitFailure;
  });
}

}  // namespace semalloc::cli
