#include "semalloc/simkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "semalloc/errors.hpp"
#include "semalloc/info_theory.hpp"
#include "semalloc/numeric.hpp"
#include "semalloc/rng.hpp"

namespace semalloc::sim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Stop the budget search once the required power is this close below it.
constexpr double kPowerRatioTol = 1e-6;
constexpr std::size_t kCdfPoints = 101;

// Distinct RNG families inside one seed.
constexpr std::uint64_t kLinkStreamTag = 0x4C494E4B00000000ULL;
constexpr std::uint64_t kMixtureStreamTag = 0x4D49580000000000ULL;

void require_increasing(const std::vector<double>& grid, const char* what) {
  if (grid.empty()) throw std::invalid_argument(fmt::format("experiment: {} is empty", what));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::isnan(grid[i])) throw std::invalid_argument(fmt::format("experiment: {} has NaN", what));
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw std::invalid_argument(
          fmt::format("experiment: {} must be strictly increasing (index {})", what, i));
    }
  }
}

std::string num(double x) { return fmt::format("{:.9g}", x); }

double mean_of(std::vector<double>& xs) {
  return xs.empty() ? 0.0 : numeric::pairwise_sum(xs) / static_cast<double>(xs.size());
}

double stderr_of(std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  for (double& x : xs) x = (x - mean) * (x - mean);
  const double var = numeric::pairwise_sum(xs) / static_cast<double>(xs.size() - 1);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

double total_power_at(const PerceptionModel& model, const link::ChannelRealization& real,
                      Method method, double p_bar, const AllocOptions& opts) {
  try {
    return allocate(method, {model, real, p_bar}, opts).total_power;
  } catch (const InfeasibleError&) {
    return kInf;
  }
}

LinkCheck make_check(std::string name, double observed, double expected, double tolerance) {
  const bool ok = std::abs(observed - expected) <= tolerance;
  return {std::move(name), observed, expected, tolerance, ok};
}

struct BlockTally {
  std::uint32_t flips = 0;
  // joint[x][y] counts of (sent bit, received bit)
  std::array<std::array<std::uint32_t, 2>, 2> joint{};
};

// Per-bit MI of the empirical joint and its delta-method standard error.
std::pair<double, double> plug_in_mi(const std::array<std::array<double, 2>, 2>& counts) {
  const double n = counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  std::array<double, 2> px{}, py{};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      px[x] += counts[x][y] / n;
      py[y] += counts[x][y] / n;
    }
  }
  double mi = 0.0;
  double second = 0.0;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const double p = counts[x][y] / n;
      if (p <= 0.0) continue;
      const double info = std::log2(p / (px[x] * py[y]));
      mi += p * info;
      second += p * info * info;
    }
  }
  const double delta_se = std::sqrt(std::max(0.0, second - mi * mi) / n);
  // Near zero MI the estimator is chi-square(1) / (2 n ln 2) rather than
  // normal; its standard deviation bounds the error from below.
  const double chi_se = std::numbers::sqrt2 / (2.0 * n * std::numbers::ln2);
  return {std::max(mi, 0.0), std::max(delta_se, chi_se)};
}

void link_checks_for_ber(const ExperimentSpec& spec, std::size_t grid_index,
                         LinkValidateReport& report) {
  const double psi = spec.link.ber_grid[grid_index];
  const std::size_t m = spec.link.n_blocks;
  const std::size_t k = spec.link.block_bits;
  const std::uint64_t seed = spec.seed ^ (kLinkStreamTag + grid_index);

  std::vector<BlockTally> tally(m);
  parallel_for(m, spec.threads, [&](std::size_t b) {
    RngStream rng(seed, b);
    BlockTally t;
    std::uint64_t source = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j % 64 == 0) source = rng.next_u64();
      const unsigned x = (source >> (j % 64)) & 1U;
      const unsigned flip = rng.bernoulli(psi) ? 1U : 0U;
      t.flips += flip;
      ++t.joint[x][x ^ flip];
    }
    tally[b] = t;
  });

  double flips = 0.0;
  double block_errors = 0.0;
  std::array<std::array<double, 2>, 2> joint{};
  for (const auto& t : tally) {
    flips += t.flips;
    block_errors += t.flips > 0 ? 1.0 : 0.0;
    for (int x = 0; x < 2; ++x) {
      for (int y = 0; y < 2; ++y) joint[x][y] += t.joint[x][y];
    }
  }
  const double bits = static_cast<double>(m) * static_cast<double>(k);
  const double blocks = static_cast<double>(m);

  const double ber_se = std::sqrt(psi * (1.0 - psi) / bits);
  report.checks.push_back(make_check(fmt::format("ber@{}", num(psi)), flips / bits, psi, 4.0 * ber_se));

  const double bler = -std::expm1(static_cast<double>(k) * std::log1p(-psi));
  const double bler_se = std::sqrt(bler * (1.0 - bler) / blocks);
  report.checks.push_back(
      make_check(fmt::format("bler@{}", num(psi)), block_errors / blocks, bler, 4.0 * bler_se));

  const auto [mi, mi_se] = plug_in_mi(joint);
  report.checks.push_back(
      make_check(fmt::format("mi@{}", num(psi)), mi, info::mi_bsc_exact(0.5, psi), 3.0 * mi_se));
}

// Discard receiver: a stream survives only if its whole block is error-free.
// The empirical frequency of each surviving subset must match the mixture
// weights behind the discard perception.
void link_checks_for_mixture(const SimContext& ctx, const ExperimentSpec& spec,
                             LinkValidateReport& report) {
  const auto model = ctx.model(Scheme::CodedDiscard, spec.metric);
  const std::size_t n = model.size();
  const double psi = spec.link.mixture_ber;
  const std::size_t m = spec.link.n_blocks;
  const std::uint64_t seed = spec.seed ^ kMixtureStreamTag;

  std::vector<std::uint8_t> received(m);
  parallel_for(m, spec.threads, [&](std::size_t b) {
    RngStream rng(seed, b);
    unsigned mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto bits = static_cast<std::size_t>(model.stream(i).k_bits);
      bool ok = true;
      for (std::size_t j = 0; j < bits; ++j) {
        if (rng.bernoulli(psi)) ok = false;
      }
      if (ok) mask |= 1U << i;
    }
    received[b] = static_cast<std::uint8_t>(mask);
  });

  std::vector<double> blers(n);
  for (std::size_t i = 0; i < n; ++i) {
    blers[i] = -std::expm1(model.stream(i).k_bits * std::log1p(-psi));
  }
  const std::size_t subsets = std::size_t{1} << n;
  std::vector<double> counts(subsets, 0.0);
  for (auto mask : received) counts[mask] += 1.0;

  const double blocks = static_cast<double>(m);
  double expected_p = 0.0;
  double expected_p2 = 0.0;
  double observed_p = 0.0;
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    double w = 1.0;
    for (std::size_t i = 0; i < n; ++i) w *= (mask >> i & 1U) ? 1.0 - blers[i] : blers[i];
    const double freq = counts[mask] / blocks;
    const double se = std::sqrt(w * (1.0 - w) / blocks);
    report.checks.push_back(make_check(fmt::format("subset{}@{}", mask, num(psi)), freq, w, 4.0 * se));
    const double value = model.subset_perception(static_cast<unsigned>(mask));
    expected_p += w * value;
    expected_p2 += w * value * value;
    observed_p += freq * value;
  }
  const double p_se = std::sqrt(std::max(0.0, expected_p2 - expected_p * expected_p) / blocks);
  report.checks.push_back(make_check(fmt::format("discard@{}", num(psi)), observed_p,
                                     model.discard(blers), 4.0 * p_se));
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::PowerVsPbar: return "power_vs_pbar";
    case ExperimentKind::PerBitPower: return "per_bit_power";
    case ExperimentKind::ErrorAndCapacity: return "error_capacity";
    case ExperimentKind::PerceptionCdf: return "perception_cdf";
    case ExperimentKind::LinkValidate: return "link_validate";
  }
  return "?";
}

ExperimentKind parse_kind(std::string_view text) {
  for (auto k : {ExperimentKind::PowerVsPbar, ExperimentKind::PerBitPower,
                 ExperimentKind::ErrorAndCapacity, ExperimentKind::PerceptionCdf,
                 ExperimentKind::LinkValidate}) {
    if (text == to_string(k)) return k;
  }
  throw std::invalid_argument(fmt::format("unknown experiment kind '{}'", text));
}

std::string_view csv_file_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::PowerVsPbar: return "power_vs_pbar.csv";
    case ExperimentKind::PerBitPower: return "per_bit_power.csv";
    case ExperimentKind::ErrorAndCapacity: return "error_capacity.csv";
    case ExperimentKind::PerceptionCdf: return "cdf.csv";
    case ExperimentKind::LinkValidate: return "link_validate.csv";
  }
  return "out.csv";
}

void ExperimentSpec::validate() const {
  if (n_realizations < 1) throw std::invalid_argument("experiment: n_realizations must be >= 1");
  if (methods.empty()) throw std::invalid_argument("experiment: methods is empty");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (methods[i] == methods[j]) {
        throw std::invalid_argument(
            fmt::format("experiment: method '{}' listed twice", semalloc::to_string(methods[i])));
      }
    }
  }
  switch (kind) {
    case ExperimentKind::PerBitPower:
      if (scheme != Scheme::CodedDiscard) {
        throw std::invalid_argument("experiment: per_bit_power needs the coded_discard scheme");
      }
      [[fallthrough]];
    case ExperimentKind::PowerVsPbar:
    case ExperimentKind::ErrorAndCapacity:
      require_increasing(p_bar_grid, "p_bar_grid");
      for (double p : p_bar_grid) {
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("experiment: p_bar outside [0, 1]");
      }
      break;
    case ExperimentKind::PerceptionCdf:
      require_increasing(power_budget_grid, "power_budget_grid");
      if (power_budget_grid.front() < 0.0) {
        throw std::invalid_argument("experiment: negative power budget");
      }
      break;
    case ExperimentKind::LinkValidate:
      require_increasing(link.ber_grid, "ber_grid");
      for (double b : link.ber_grid) {
        if (b < 0.0 || b > kMaxBer) throw std::invalid_argument("experiment: BER outside [0, 0.5]");
      }
      if (link.n_blocks < 1 || link.block_bits < 1) {
        throw std::invalid_argument("experiment: link validation needs blocks and bits");
      }
      if (!(link.mixture_ber >= 0.0 && link.mixture_ber <= kMaxBer)) {
        throw std::invalid_argument("experiment: mixture_ber outside [0, 0.5]");
      }
      break;
  }
}

PerceptionModel SimContext::model(Scheme scheme, Metric metric) const {
  return PerceptionModel(scheme, presets[static_cast<int>(metric)], streams);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  unsigned workers = threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

Sweep run_sweep(const SimContext& ctx, const ExperimentSpec& spec) {
  spec.validate();
  const auto model = ctx.model(spec.scheme, spec.metric);
  Sweep sweep;
  sweep.p_bar = spec.p_bar_grid;
  sweep.methods = spec.methods;
  sweep.streams = model.size();
  sweep.records.assign(spec.p_bar_grid.size(), std::vector<RunRecord>(spec.n_realizations));

  parallel_for(spec.n_realizations, spec.threads, [&](std::size_t r) {
    auto rng = rng_stream(spec.seed, r);
    const auto real = link::draw_realization(ctx.channel, model.size(), rng);
    for (std::size_t p = 0; p < spec.p_bar_grid.size(); ++p) {
      RunRecord rec;
      rec.realization = r;
      rec.gain_sq = real.gain_sq;
      for (Method method : spec.methods) {
        try {
          auto result = allocate(method, {model, real, spec.p_bar_grid[p]}, ctx.alloc);
          std::vector<double> cap(result.snr.size());
          for (std::size_t i = 0; i < cap.size(); ++i) cap[i] = std::log2(1.0 + result.snr[i]);
          rec.capacity.push_back(std::move(cap));
          rec.results.emplace_back(std::move(result));
        } catch (const InfeasibleError&) {
          rec.capacity.emplace_back();
          rec.results.emplace_back(std::nullopt);
        }
      }
      sweep.records[p][r] = std::move(rec);
    }
  });
  return sweep;
}

std::vector<PowerRow> aggregate_power(const Sweep& sweep) {
  std::vector<PowerRow> rows;
  for (std::size_t p = 0; p < sweep.p_bar.size(); ++p) {
    for (std::size_t m = 0; m < sweep.methods.size(); ++m) {
      std::vector<double> powers;
      for (const auto& rec : sweep.records[p]) {
        if (rec.results[m]) powers.push_back(rec.results[m]->total_power);
      }
      const std::size_t feasible = powers.size();
      const double mean = feasible ? mean_of(powers) : std::nan("");
      const double se = feasible ? stderr_of(powers, mean) : std::nan("");
      rows.push_back({sweep.p_bar[p], sweep.methods[m], mean, se, feasible});
    }
  }
  return rows;
}

std::vector<PerBitRow> aggregate_per_bit(const Sweep& sweep, const PerceptionModel& model) {
  std::vector<PerBitRow> rows;
  for (std::size_t p = 0; p < sweep.p_bar.size(); ++p) {
    for (std::size_t m = 0; m < sweep.methods.size(); ++m) {
      for (std::size_t i = 0; i < sweep.streams; ++i) {
        std::vector<double> per_bit;
        std::size_t zeros = 0;
        for (const auto& rec : sweep.records[p]) {
          if (!rec.results[m]) continue;
          const double q = rec.results[m]->power_w[i];
          per_bit.push_back(unit_count(model, i) * q / model.stream(i).k_bits);
          if (q == 0.0) ++zeros;
        }
        const double mean = per_bit.empty() ? std::nan("") : mean_of(per_bit);
        rows.push_back({sweep.p_bar[p], sweep.methods[m], i, mean, zeros});
      }
    }
  }
  return rows;
}

std::vector<ErrorCapacityRow> aggregate_error_capacity(const Sweep& sweep) {
  std::vector<ErrorCapacityRow> rows;
  for (std::size_t p = 0; p < sweep.p_bar.size(); ++p) {
    for (std::size_t m = 0; m < sweep.methods.size(); ++m) {
      for (std::size_t i = 0; i < sweep.streams; ++i) {
        std::vector<double> errors;
        std::vector<double> caps;
        for (const auto& rec : sweep.records[p]) {
          if (!rec.results[m]) continue;
          errors.push_back(rec.results[m]->error[i]);
          caps.push_back(rec.capacity[m][i]);
        }
        const bool any = !errors.empty();
        rows.push_back({sweep.p_bar[p], sweep.methods[m], i, any ? mean_of(errors) : std::nan(""),
                        any ? mean_of(caps) : std::nan("")});
      }
    }
  }
  return rows;
}

std::vector<PowerRow> run_power_vs_pbar(const SimContext& ctx, const ExperimentSpec& spec) {
  return aggregate_power(run_sweep(ctx, spec));
}

std::vector<PerBitRow> run_per_bit_power(const SimContext& ctx, const ExperimentSpec& spec) {
  spec.validate();
  return aggregate_per_bit(run_sweep(ctx, spec), ctx.model(spec.scheme, spec.metric));
}

std::vector<ErrorCapacityRow> run_error_capacity(const SimContext& ctx, const ExperimentSpec& spec) {
  return aggregate_error_capacity(run_sweep(ctx, spec));
}

double achieved_perception(const PerceptionModel& model, const link::ChannelRealization& real,
                           Method method, double budget_w, const AllocOptions& opts) {
  if (budget_w < 0.0 || std::isnan(budget_w)) {
    throw std::invalid_argument("achieved_perception: budget must be >= 0");
  }
  double lo = model.p_best();
  double hi = model.p_at_max_error();
  if (total_power_at(model, real, method, lo, opts) <= budget_w) return lo;
  // power(hi) is zero, so hi always fits.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double power = total_power_at(model, real, method, mid, opts);
    if (power <= budget_w) {
      hi = mid;
      if (power >= budget_w * (1.0 - kPowerRatioTol)) break;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double empirical_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("empirical_quantile: no data");
  if (q <= 0.0) return sorted.front();
  const auto n = static_cast<double>(sorted.size());
  const auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
  return sorted[std::min(sorted.size(), std::max<std::size_t>(rank, 1)) - 1];
}

std::vector<CdfRow> run_perception_cdf(const SimContext& ctx, const ExperimentSpec& spec) {
  spec.validate();
  const auto model = ctx.model(spec.scheme, spec.metric);
  const std::size_t nb = spec.power_budget_grid.size();
  const std::size_t nm = spec.methods.size();
  // achieved[r][b * nm + m]
  std::vector<std::vector<double>> achieved(spec.n_realizations);
  parallel_for(spec.n_realizations, spec.threads, [&](std::size_t r) {
    auto rng = rng_stream(spec.seed, r);
    const auto real = link::draw_realization(ctx.channel, model.size(), rng);
    std::vector<double> row(nb * nm);
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t m = 0; m < nm; ++m) {
        row[b * nm + m] =
            achieved_perception(model, real, spec.methods[m], spec.power_budget_grid[b], ctx.alloc);
      }
    }
    achieved[r] = std::move(row);
  });

  std::vector<CdfRow> rows;
  std::vector<double> column(spec.n_realizations);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t m = 0; m < nm; ++m) {
      for (std::size_t r = 0; r < spec.n_realizations; ++r) column[r] = achieved[r][b * nm + m];
      std::sort(column.begin(), column.end());
      for (std::size_t k = 0; k < kCdfPoints; ++k) {
        const double q = static_cast<double>(k) / static_cast<double>(kCdfPoints - 1);
        rows.push_back({spec.power_budget_grid[b], spec.methods[m], q, empirical_quantile(column, q)});
      }
    }
  }
  return rows;
}

bool LinkValidateReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const LinkCheck& c) { return c.passed; });
}

LinkValidateReport run_link_validate(const SimContext& ctx, const ExperimentSpec& spec) {
  spec.validate();
  LinkValidateReport report;
  for (std::size_t j = 0; j < spec.link.ber_grid.size(); ++j) link_checks_for_ber(spec, j, report);
  link_checks_for_mixture(ctx, spec, report);
  return report;
}

std::string to_csv(std::span<const PowerRow> rows) {
  std::string out = fmt::format("{}\n", kPowerHeader);
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", num(r.p_bar), semalloc::to_string(r.method),
                       num(r.mean_total_power_w), num(r.stderr_w), r.n_feasible);
  }
  return out;
}

std::string to_csv(std::span<const PerBitRow> rows) {
  std::string out = fmt::format("{}\n", kPerBitHeader);
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", num(r.p_bar), semalloc::to_string(r.method), r.stream,
                       num(r.mean_power_per_bit_w), r.n_zero_power);
  }
  return out;
}

std::string to_csv(std::span<const ErrorCapacityRow> rows) {
  std::string out = fmt::format("{}\n", kErrorCapacityHeader);
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", num(r.p_bar), semalloc::to_string(r.method), r.stream,
                       num(r.mean_error), num(r.mean_capacity));
  }
  return out;
}

std::string to_csv(std::span<const CdfRow> rows) {
  std::string out = fmt::format("{}\n", kCdfHeader);
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{}\n", num(r.budget_w), semalloc::to_string(r.method),
                       num(r.quantile), num(r.perception));
  }
  return out;
}

std::string to_csv(const LinkValidateReport& report) {
  std::string out = fmt::format("{}\n", kLinkHeader);
  for (const auto& c : report.checks) {
    out += fmt::format("{},{},{},{},{}\n", c.name, num(c.observed), num(c.expected),
                       num(c.tolerance), c.passed ? "true" : "false");
  }
  return out;
}

std::string run_to_csv(const SimContext& ctx, const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::PowerVsPbar: return to_csv(run_power_vs_pbar(ctx, spec));
    case ExperimentKind::PerBitPower: return to_csv(run_per_bit_power(ctx, spec));
    case ExperimentKind::ErrorAndCapacity: return to_csv(run_error_capacity(ctx, spec));
    case ExperimentKind::PerceptionCdf: return to_csv(run_perception_cdf(ctx, spec));
    case ExperimentKind::LinkValidate: return to_csv(run_link_validate(ctx, spec));
  }
  throw std::logic_error("unhandled experiment kind");
}

}  // namespace semalloc::sim
