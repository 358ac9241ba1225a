#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "semalloc/rng.hpp"
#include "semalloc/simkit.hpp"

using namespace semalloc;
using namespace semalloc::sim;

namespace {

ExperimentSpec sweep_spec(ExperimentKind kind, Scheme scheme, std::vector<double> grid, std::size_t n) {
  ExperimentSpec spec;
  spec.name = "t";
  spec.kind = kind;
  spec.scheme = scheme;
  spec.p_bar_grid = std::move(grid);
  spec.n_realizations = n;
  spec.seed = 77;
  return spec;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

const LinkCheck& find_check(const LinkValidateReport& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return c;
  }
  throw std::runtime_error("missing check " + name);
}

}  // namespace

TEST(Rng, SameStreamSameNumbers) {
  auto a = rng_stream(9, 4);
  auto b = rng_stream(9, 4);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, NeighbouringStreamsUncorrelated) {
  auto a = rng_stream(9, 0);
  auto b = rng_stream(9, 1);
  constexpr int kN = 100000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < kN; ++i) {
    const double x = a.uniform();
    const double y = b.uniform();
    sa += x;
    sb += y;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  const double cov = sab / kN - sa / kN * sb / kN;
  const double corr = cov / std::sqrt((saa / kN - sa * sa / kN / kN) * (sbb / kN - sb * sb / kN / kN));
  EXPECT_LT(std::abs(corr), 0.01);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(Determinism, ParallelMatchesSerialByteForByte) {
  const SimContext ctx;
  auto spec = sweep_spec(ExperimentKind::PowerVsPbar, Scheme::CodedDiscard, {0.4, 0.6, 0.8}, 60);
  spec.threads = 1;
  const auto serial = run_to_csv(ctx, spec);
  spec.threads = 8;
  EXPECT_EQ(run_to_csv(ctx, spec), serial);
  EXPECT_EQ(run_to_csv(ctx, spec), serial);
}

TEST(Csv, Headers) {
  const SimContext ctx;
  auto spec = sweep_spec(ExperimentKind::PowerVsPbar, Scheme::CodedDiscard, {0.6}, 3);
  EXPECT_EQ(first_line(run_to_csv(ctx, spec)), kPowerHeader);
  spec.kind = ExperimentKind::PerBitPower;
  EXPECT_EQ(first_line(run_to_csv(ctx, spec)), kPerBitHeader);
  spec.kind = ExperimentKind::ErrorAndCapacity;
  EXPECT_EQ(first_line(run_to_csv(ctx, spec)), kErrorCapacityHeader);
  spec.kind = ExperimentKind::PerceptionCdf;
  spec.power_budget_grid = {1.0};
  EXPECT_EQ(first_line(run_to_csv(ctx, spec)), kCdfHeader);
  spec.kind = ExperimentKind::LinkValidate;
  spec.link.n_blocks = 200;
  EXPECT_EQ(first_line(run_to_csv(ctx, spec)), kLinkHeader);
}

TEST(PowerSweep, ZeroPowerAtLooseTarget) {
  const SimContext ctx;
  const auto rows = run_power_vs_pbar(ctx, sweep_spec(ExperimentKind::PowerVsPbar, Scheme::CodedDiscard, {1.0}, 20));
  ASSERT_EQ(rows.size(), 3U);
  for (const auto& r : rows) {
    EXPECT_EQ(r.mean_total_power_w, 0.0);
    EXPECT_EQ(r.n_feasible, 20U);
  }
}

TEST(PowerSweep, InfeasibleTargetYieldsEmptyRow) {
  const SimContext ctx;
  const auto rows = run_power_vs_pbar(ctx, sweep_spec(ExperimentKind::PowerVsPbar, Scheme::CodedDiscard, {0.2}, 5));
  for (const auto& r : rows) {
    EXPECT_EQ(r.n_feasible, 0U);
    EXPECT_TRUE(std::isnan(r.mean_total_power_w));
  }
}

TEST(PowerSweep, BisectionMeanPowerNonIncreasingInTarget) {
  const SimContext ctx;
  std::vector<double> grid;
  for (int k = 0; k <= 12; ++k) grid.push_back(0.35 + 0.05 * k);
  auto spec = sweep_spec(ExperimentKind::PowerVsPbar, Scheme::CodedDiscard, grid, 100);
  spec.methods = {Method::Bisection};
  const auto rows = run_power_vs_pbar(ctx, spec);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_LE(rows[k].mean_total_power_w, rows[k - 1].mean_total_power_w * (1 + 1e-9)) << rows[k].p_bar;
  }
}

TEST(PerBit, AccountingMatchesTotalPower) {
  const SimContext ctx;
  const auto spec = sweep_spec(ExperimentKind::PerBitPower, Scheme::CodedDiscard, {0.5, 0.7}, 40);
  const auto model = ctx.model(spec.scheme, spec.metric);
  const auto sweep = run_sweep(ctx, spec);
  const auto power = aggregate_power(sweep);
  const auto per_bit = aggregate_per_bit(sweep, model);
  for (const auto& row : power) {
    double sum = 0.0;
    for (const auto& b : per_bit) {
      if (b.p_bar == row.p_bar && b.method == row.method) sum += model.stream(b.stream).k_bits * b.mean_power_per_bit_w;
    }
    EXPECT_LT(rel(sum, row.mean_total_power_w), 1e-9);
  }
}

TEST(PerBit, RejectsUncodedScheme) {
  auto spec = sweep_spec(ExperimentKind::PerBitPower, Scheme::UncodedForward, {0.5}, 4);
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(ErrorCapacity, StructuralProperties) {
  const SimContext ctx;
  for (Scheme scheme : {Scheme::UncodedForward, Scheme::CodedDiscard}) {
    const std::vector<double> grid = scheme == Scheme::CodedDiscard ? std::vector<double>{0.45, 0.7, 0.9}
                                                                    : std::vector<double>{0.45, 0.6, 0.75};
    const auto sweep = run_sweep(ctx, sweep_spec(ExperimentKind::ErrorAndCapacity, scheme, grid, 100));
    for (const auto& row : sweep.records) {
      for (const auto& rec : row) {
        for (std::size_t m = 0; m < sweep.methods.size(); ++m) {
          ASSERT_TRUE(rec.results[m]);
          const auto& res = *rec.results[m];
          const auto& cap = rec.capacity[m];
          if (sweep.methods[m] == Method::Unaware) {
            EXPECT_NEAR(cap[0], cap[1], 1e-9);
          }
          if (sweep.methods[m] == Method::Proportional && scheme == Scheme::CodedDiscard) {
            EXPECT_NEAR(res.error[0], res.error[1], 1e-8);
          }
          for (std::size_t i = 0; i < 2; ++i) {
            if (res.power_w[i] == 0.0) {
              EXPECT_EQ(cap[i], 0.0);
              if (scheme == Scheme::CodedDiscard) {
                EXPECT_EQ(res.error[i], 1.0);
              }
            }
          }
        }
      }
    }
  }
}

TEST(Cdf, BudgetLimits) {
  const SimContext ctx;
  for (Scheme scheme : {Scheme::UncodedForward, Scheme::CodedDiscard}) {
    const auto model = ctx.model(scheme, Metric::Clip);
    auto rng = rng_stream(3, 0);
    const auto real = link::draw_realization(ctx.channel, 2, rng);
    for (Method method : {Method::Unaware, Method::Proportional, Method::Bisection}) {
      EXPECT_EQ(achieved_perception(model, real, method, 0.0, ctx.alloc), model.p_at_max_error());
      EXPECT_EQ(achieved_perception(model, real, method, std::numeric_limits<double>::infinity(), ctx.alloc),
                model.p_best());
    }
  }
}

TEST(Cdf, BisectionReachesLowerPerceptionThanUnaware) {
  const SimContext ctx;
  const auto model = ctx.model(Scheme::CodedDiscard, Metric::Clip);
  for (std::uint64_t r = 0; r < 10; ++r) {
    auto rng = rng_stream(4, r);
    const auto real = link::draw_realization(ctx.channel, 2, rng);
    for (double budget : {0.05, 1.0}) {
      const double b = achieved_perception(model, real, Method::Bisection, budget, ctx.alloc);
      const double u = achieved_perception(model, real, Method::Unaware, budget, ctx.alloc);
      EXPECT_LE(b, u + 1e-6);
    }
  }
}

TEST(Cdf, RowsPerBudgetAndMethod) {
  const SimContext ctx;
  auto spec = sweep_spec(ExperimentKind::PerceptionCdf, Scheme::CodedDiscard, {}, 10);
  spec.power_budget_grid = {0.0, 0.5};
  const auto rows = run_perception_cdf(ctx, spec);
  EXPECT_EQ(rows.size(), 2U * 3U * 101U);
  for (const auto& r : rows) {
    if (r.budget_w == 0.0) {
      EXPECT_EQ(r.perception, 1.0);
    }
  }
}

TEST(EmpiricalQuantile, LowerOrderStatistic) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  EXPECT_EQ(empirical_quantile(xs, 0.0), 1.0);
  EXPECT_EQ(empirical_quantile(xs, 0.25), 1.0);
  EXPECT_EQ(empirical_quantile(xs, 0.26), 2.0);
  EXPECT_EQ(empirical_quantile(xs, 1.0), 4.0);
}

TEST(LinkValidate, ErrorFreeChannel) {
  const SimContext ctx;
  ExperimentSpec spec;
  spec.kind = ExperimentKind::LinkValidate;
  spec.link.ber_grid = {0.0};
  spec.link.n_blocks = 2000;
  const auto report = run_link_validate(ctx, spec);
  EXPECT_EQ(find_check(report, "ber@0").observed, 0.0);
  EXPECT_EQ(find_check(report, "bler@0").observed, 0.0);
  EXPECT_TRUE(report.passed());
}

TEST(LinkValidate, BlockErrorRateAndFullNoise) {
  const SimContext ctx;
  ExperimentSpec spec;
  spec.kind = ExperimentKind::LinkValidate;
  spec.link.ber_grid = {0.01, 0.5};
  spec.link.n_blocks = 20000;
  const auto report = run_link_validate(ctx, spec);
  EXPECT_NEAR(find_check(report, "bler@0.01").expected, 1.0 - std::pow(0.99, 100), 1e-12);
  EXPECT_NEAR(find_check(report, "bler@0.01").expected, 0.6340, 1e-4);
  EXPECT_NEAR(find_check(report, "mi@0.5").expected, 0.0, 1e-15);
  for (const auto& c : report.checks) EXPECT_TRUE(c.passed) << c.name;
}

TEST(SpecValidation, RejectsBadGrids) {
  auto spec = sweep_spec(ExperimentKind::PowerVsPbar, Scheme::CodedDiscard, {0.5, 0.4}, 4);
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.p_bar_grid = {1.2};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.p_bar_grid = {0.5};
  spec.n_realizations = 0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(KindNames, RoundTrip) {
  for (auto k : {ExperimentKind::PowerVsPbar, ExperimentKind::PerBitPower, ExperimentKind::ErrorAndCapacity,
                 ExperimentKind::PerceptionCdf, ExperimentKind::LinkValidate}) {
    EXPECT_EQ(parse_kind(to_string(k)), k);
  }
  EXPECT_EQ(csv_file_name(ExperimentKind::PerceptionCdf), "cdf.csv");
}
