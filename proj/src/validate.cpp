#include "semalloc/validate.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "semalloc/info_theory.hpp"
#include "semalloc/link.hpp"
#include "semalloc/rng.hpp"
#include "semalloc/simkit.hpp"

namespace semalloc::cli {
namespace {

constexpr std::uint64_t kSuiteSeed = 20240601;

class Tally {
 public:
  explicit Tally(std::string name) { result_.name = std::move(name); }

  void check(const std::string& what, double residual, double tolerance) {
    ++result_.checks;
    const double scaled = tolerance > 0.0 ? residual / tolerance : (residual == 0.0 ? 0.0 : HUGE_VAL);
    if (!(residual <= tolerance)) result_.passed = false;
    if (!(scaled <= result_.max_residual)) {
      result_.max_residual = scaled;
      result_.worst_check = what;
    }
  }

  void relative(const std::string& what, double got, double want, double tolerance) {
    check(what, std::abs(got - want) / std::max(std::abs(want), 1e-300), tolerance);
  }

  SuiteResult done() && { return std::move(result_); }

 private:
  SuiteResult result_;
};

// Uniform draw on [lo, hi].
double draw(RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

std::vector<double> random_row(RngStream& rng, std::size_t n) {
  std::vector<double> row(n);
  double sum = 0.0;
  for (double& x : row) sum += (x = rng.exponential());
  for (double& x : row) x /= sum;
  // Push the rounding residue into the largest entry so the row sums to 1.
  double fixed = 0.0;
  for (double x : row) fixed += x;
  *std::max_element(row.begin(), row.end()) += 1.0 - fixed;
  return row;
}

info::StochasticMatrix random_channel(RngStream& rng, std::size_t in, std::size_t out) {
  std::vector<double> probs;
  for (std::size_t i = 0; i < in; ++i) {
    const auto row = random_row(rng, out);
    probs.insert(probs.end(), row.begin(), row.end());
  }
  return info::StochasticMatrix(in, out, std::move(probs));
}

SuiteResult suite_info() {
  Tally t("info");
  const std::array<double, 7> bers{0.0, 1e-4, 1e-3, 0.01, 0.1, 0.3, 0.5};
  for (std::size_t k : {1U, 8U, 256U}) {
    const info::BernoulliStream stream(std::vector<double>(k, 0.5));
    for (double psi : bers) {
      const double per_bit = info::mi_uncoded_lemma2(stream, std::vector<double>(k, psi));
      t.check(fmt::format("uncoded K={} psi={}", k, psi),
              std::abs(per_bit - static_cast<double>(k) * info::mi_bsc_exact(0.5, psi)), 1e-12 * k);
    }
  }
  // The BSC closed form against a direct double sum over the joint.
  for (double phi : {0.1, 0.3, 0.5, 0.9}) {
    for (double psi : bers) {
      const info::StochasticMatrix bsc(2, 2, {1.0 - psi, psi, psi, 1.0 - psi});
      const std::array<double, 2> source{1.0 - phi, phi};
      const double direct = info::mi_joint(info::compose_joint(source, bsc));
      t.check(fmt::format("bsc phi={} psi={}", phi, psi),
              std::abs(direct - info::mi_bsc_exact(phi, psi)), 1e-12);
    }
  }
  for (double h : {0.0, 0.5, 1.0, 64.0}) {
    for (double bler : {0.0, 0.25, 1.0}) {
      t.check(fmt::format("coded H={} bler={}", h, bler),
              std::abs(info::mi_coded_lemma2(h, bler) - (1.0 - bler) * h), 1e-12);
    }
  }
  for (std::uint64_t c = 0; c < 200; ++c) {
    RngStream rng(kSuiteSeed, c);
    const std::size_t nx = 2 + rng.next_u64() % 4;
    const std::size_t ny = 2 + rng.next_u64() % 4;
    const std::size_t nz = 2 + rng.next_u64() % 4;
    const auto source = random_row(rng, nx);
    const auto report =
        info::dpi_check(source, random_channel(rng, nx, ny), random_channel(rng, ny, nz));
    t.check(fmt::format("dpi chain {}", c), std::max(0.0, report.i_xz - report.i_xy), 1e-10);
  }
  return std::move(t).done();
}

SuiteResult suite_link() {
  Tally t("link");
  // Below x = -3 the tail 1 - Q(x) is not representable accurately enough
  // to pin x.
  for (double x = -3.0; x <= 8.0; x += 0.25) {
    t.check(fmt::format("q_inverse(q({}))", x), std::abs(link::q_inverse(link::q_function(x)) - x),
            1e-10 * std::max(1.0, std::abs(x)));
  }
  for (double psi : {1e-9, 1e-6, 1e-3, 0.01, 0.1, 0.3, 0.49}) {
    t.relative(fmt::format("ber round trip {}", psi), link::ber_bpsk(link::snr_from_ber(psi)), psi,
               1e-9);
  }
  for (double k_over_n : {0.5, 0.8, 0.95}) {
    for (double n : {100.0, 320.0, 2560.0}) {
      for (double bler : {1e-6, 1e-3, 0.1, 0.5, 0.9}) {
        const double k = k_over_n * n;
        t.relative(fmt::format("bler round trip K={} N={} {}", k, n, bler),
                   link::bler_fbl(link::snr_from_bler(bler, k, n), k, n), bler, 1e-9);
      }
    }
  }
  return std::move(t).done();
}

SuiteResult suite_lambertw() {
  Tally t("lambertw");
  const std::array<double, 3> ratios{0.5, 0.8, 0.95};
  for (std::uint64_t c = 0; c < 100; ++c) {
    RngStream rng(kSuiteSeed + 1, c);
    const double target = std::exp(draw(rng, std::log(1e-6), std::log(0.49)));
    const double ratio = ratios[rng.next_u64() % ratios.size()];
    const double n = std::round(draw(rng, 100.0, 2000.0));
    const double k = ratio * n;
    const double gain = std::exp(draw(rng, std::log(1e-12), std::log(1e-6)));
    const double noise = 1e-14;
    const double closed = link::power_coded_closed_form(target, k, n, gain, noise);
    const double direct = noise / gain * link::snr_from_bler(target, k, n);
    t.relative(fmt::format("instance {} (bler {:.3g}, K/N {}, N {})", c, target, ratio, n), closed,
               direct, 1e-6);
  }
  return std::move(t).done();
}

SuiteResult suite_perception(const ConfigDocument& doc) {
  Tally t("perception");
  for (Metric m : {Metric::Clip, Metric::MsSsim}) {
    const auto& preset = doc.presets[static_cast<int>(m)];
    for (Scheme s : {Scheme::UncodedForward, Scheme::CodedDiscard}) {
      const PerceptionModel model(s, preset, doc.streams);
      const std::string tag = fmt::format("{} {}", to_string(m), to_string(s));
      const std::size_t n = model.size();
      t.check(tag + " best corner",
              std::abs(model.evaluate(std::vector<double>(n, 0.0)) - preset.p_best), 1e-12);
      const double worst = s == Scheme::CodedDiscard ? 1.0 : preset.p_worst_uncoded;
      t.check(tag + " worst corner",
              std::abs(model.evaluate(std::vector<double>(n, model.max_error())) - worst), 1e-12);
      if (s == Scheme::CodedDiscard) {
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<double> e(n, 1.0);
          e[i] = 0.0;
          t.check(fmt::format("{} only stream {}", tag, i),
                  std::abs(model.evaluate(e) - (1.0 - model.semantic_value(i))), 1e-12);
        }
      }
      // Non-decreasing along each axis of a grid.
      constexpr int kGrid = 24;
      for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a <= kGrid; ++a) {
          std::vector<double> e(n, model.max_error() * a / kGrid);
          double prev = -1.0;
          for (int b = 0; b <= kGrid; ++b) {
            e[i] = model.max_error() * b / kGrid;
            const double p = model.evaluate(e);
            t.check(fmt::format("{} monotone stream {}", tag, i), std::max(0.0, prev - p), 1e-15);
            t.check(fmt::format("{} range", tag),
                    std::max({0.0, preset.p_best - p, p - 1.0}), 1e-15);
            prev = p;
          }
        }
      }
    }
  }
  return std::move(t).done();
}

SuiteResult suite_linksim(const ConfigDocument& doc) {
  Tally t("linksim");
  sim::ExperimentSpec spec;
  spec.name = "validate";
  spec.kind = sim::ExperimentKind::LinkValidate;
  spec.metric = doc.metric;
  spec.seed = kSuiteSeed;
  const auto report = sim::run_link_validate(doc.context(), spec);
  for (const auto& c : report.checks) {
    t.check(c.name, std::abs(c.observed - c.expected), c.tolerance);
  }
  return std::move(t).done();
}

}  // namespace

const std::vector<std::string_view>& suite_names() {
  static const std::vector<std::string_view> names{"info", "link", "lambertw", "perception",
                                                   "linksim"};
  return names;
}

SuiteResult run_suite(std::string_view name, const ConfigDocument& doc) {
  if (name == "info") return suite_info();
  if (name == "link") return suite_link();
  if (name == "lambertw") return suite_lambertw();
  if (name == "perception") return suite_perception(doc);
  if (name == "linksim") return suite_linksim(doc);
  throw ConfigError(fmt::format("unknown suite '{}' (expected one of: {})", name,
                                fmt::join(suite_names(), ", ")));
}

std::vector<SuiteResult> run_suites(const ConfigDocument& doc, std::optional<std::string_view> only) {
  if (only) return {run_suite(*only, doc)};
  std::vector<SuiteResult> results;
  for (auto name : suite_names()) results.push_back(run_suite(name, doc));
  return results;
}

}  // namespace semalloc::cli
