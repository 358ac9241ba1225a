#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "semalloc/errors.hpp"
#include "semalloc/perception.hpp"
#include "semalloc/rng.hpp"

using namespace semalloc;

namespace {

PerceptionModel model(Scheme s, Metric m) { return PerceptionModel(s, default_preset(m), default_streams()); }

using E = std::array<double, 2>;

}  // namespace

TEST(Presets, PinnedConstants) {
  const auto streams = default_streams();
  EXPECT_EQ(streams[0].semantic(Metric::Clip), 0.5887);
  EXPECT_EQ(streams[1].semantic(Metric::Clip), 0.3596);
  EXPECT_EQ(streams[0].semantic(Metric::MsSsim), 0.5465);
  EXPECT_EQ(streams[1].semantic(Metric::MsSsim), 0.6355);
  EXPECT_EQ(clip_preset().p_best, 0.3191);
  EXPECT_EQ(msssim_preset().p_best, 0.3313);
  EXPECT_EQ(clip_preset().p_worst_uncoded, 0.8112);
  EXPECT_EQ(msssim_preset().p_worst_uncoded, 0.4720);
  for (const auto& s : streams) EXPECT_DOUBLE_EQ(s.k_bits / s.n_symbols, 0.8);
}

TEST(Presets, StreamsAreNotIndependent) {
  for (Metric m : {Metric::Clip, Metric::MsSsim}) {
    const auto streams = default_streams();
    EXPECT_GT(streams[0].semantic(m) + streams[1].semantic(m), 1.0 - default_preset(m).p_best);
  }
}

TEST(QualityFactor, Examples) {
  const ForwardShape s{0.005, 1.5, 0.05};
  EXPECT_DOUBLE_EQ(quality_factor(s, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quality_factor({0.01, 2.0, 0.0}, 0.01), 0.5);
  EXPECT_NEAR(quality_factor(s, 0.5), 0.050949050949050949051, 1e-15);
  double prev = 1.0;
  for (int i = 1; i <= 500; ++i) {
    const double u = quality_factor(s, i * 0.001);
    EXPECT_LT(u, prev);
    prev = u;
  }
  EXPECT_THROW(quality_factor(s, 0.6), std::domain_error);
}

TEST(QualityFactor, DerivativeMatchesFiniteDifference) {
  const ForwardShape s{0.02, 1.5, 0.05};
  for (double b : {0.001, 0.01, 0.05, 0.3}) {
    const double h = 1e-7;
    const double fd = (quality_factor(s, b + h) - quality_factor(s, b - h)) / (2 * h);
    EXPECT_NEAR(quality_factor_derivative(s, b), fd, 1e-6 * std::abs(fd));
  }
}

TEST(Forward, Examples) {
  const auto clip = model(Scheme::UncodedForward, Metric::Clip);
  EXPECT_NEAR(perception_forward(clip, E{0.0, 0.0}), 0.3191, 1e-12);
  EXPECT_NEAR(perception_forward(clip, E{0.5, 0.5}), 0.8112, 1e-12);
  // Frozen from a 50-digit evaluation of the same formula.
  EXPECT_NEAR(perception_forward(clip, E{0.01, 0.001}), 0.47051246736935290607, 1e-14);
  const auto ms = model(Scheme::UncodedForward, Metric::MsSsim);
  EXPECT_NEAR(perception_forward(ms, E{0.01, 0.001}), 0.37459147360062579533, 1e-14);
  EXPECT_THROW(perception_forward(clip, std::vector<double>{0.1}), std::invalid_argument);
  EXPECT_THROW(perception_forward(model(Scheme::CodedDiscard, Metric::Clip), E{0, 0}),
               std::invalid_argument);
}

TEST(Discard, Examples) {
  const auto clip = model(Scheme::CodedDiscard, Metric::Clip);
  EXPECT_NEAR(perception_discard(clip, E{0.0, 0.0}), 0.3191, 1e-12);
  EXPECT_EQ(perception_discard(clip, E{1.0, 1.0}), 1.0);
  EXPECT_NEAR(perception_discard(clip, E{0.0, 1.0}), 0.4113, 1e-12);
  EXPECT_NEAR(perception_discard(clip, E{1.0, 0.0}), 1.0 - 0.3596, 1e-12);
}

TEST(Discard, MultilinearInEachBler) {
  const auto m = model(Scheme::CodedDiscard, Metric::MsSsim);
  const double a = 0.37;
  for (double b : {0.0, 0.2, 0.9}) {
    const double lo = m.discard(E{0.0, b});
    const double hi = m.discard(E{1.0, b});
    EXPECT_NEAR(m.discard(E{a, b}), (1 - a) * lo + a * hi, 1e-15);
  }
}

TEST(Discard, SingleStreamMatchesTwoPointFormula) {
  auto stream = default_streams()[0];
  auto preset = clip_preset();
  preset.p_best = 1.0 - 0.5887;
  const PerceptionModel one(Scheme::CodedDiscard, preset, {stream});
  for (double psi : {0.0, 0.3, 1.0}) {
    EXPECT_NEAR(one.discard(std::vector<double>{psi}), psi * 1.0 + (1 - psi) * (1 - 0.5887), 1e-15);
  }
}

TEST(Model, MonotoneAndInRangeOnRandomPairs) {
  for (Scheme s : {Scheme::UncodedForward, Scheme::CodedDiscard}) {
    for (Metric m : {Metric::Clip, Metric::MsSsim}) {
      const auto pm = model(s, m);
      auto rng = rng_stream(11, static_cast<int>(s) * 2 + static_cast<int>(m));
      for (int t = 0; t < 10000; ++t) {
        E lo{rng.uniform() * pm.max_error(), rng.uniform() * pm.max_error()};
        E hi{lo[0] + rng.uniform() * (pm.max_error() - lo[0]),
             lo[1] + rng.uniform() * (pm.max_error() - lo[1])};
        const double plo = pm.evaluate(lo);
        EXPECT_LE(plo, pm.evaluate(hi) + 1e-12);
        EXPECT_GE(plo, pm.p_best() - 1e-15);
        EXPECT_LE(plo, 1.0);
      }
    }
  }
}

TEST(Model, CornersMatchSubsetTable) {
  const auto m = model(Scheme::CodedDiscard, Metric::Clip);
  EXPECT_EQ(m.evaluate(E{1, 1}), m.subset_perception(0));
  EXPECT_EQ(m.evaluate(E{0, 1}), m.subset_perception(1));
  EXPECT_EQ(m.evaluate(E{1, 0}), m.subset_perception(2));
  EXPECT_EQ(m.evaluate(E{0, 0}), m.subset_perception(3));
}

TEST(Model, SingletonMatchesSemanticValue) {
  for (Scheme s : {Scheme::UncodedForward, Scheme::CodedDiscard}) {
    for (Metric m : {Metric::Clip, Metric::MsSsim}) {
      const auto pm = model(s, m);
      for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(1.0 - pm.semantic_value_received(i, 0.0),
                    pm.subset_perception(1u << i), 1e-15);
      }
    }
  }
}

TEST(Model, RejectsInconsistentPresets) {
  auto preset = clip_preset();
  preset.subset_overrides[1] = 0.5;  // singleton must equal 1 - L
  EXPECT_THROW(PerceptionModel(Scheme::CodedDiscard, preset, default_streams()),
               std::invalid_argument);
  preset = clip_preset();
  preset.p_best = 0.9;
  EXPECT_THROW(PerceptionModel(Scheme::CodedDiscard, preset, default_streams()),
               std::invalid_argument);
}

TEST(SemanticValue, Discard) {
  const auto m = model(Scheme::CodedDiscard, Metric::Clip);
  EXPECT_EQ(m.semantic_value_received(0, 0.0), 0.5887);
  EXPECT_EQ(m.semantic_value_received(0, 1.0), 0.0);
  EXPECT_NEAR(m.semantic_value_received(0, 0.5), 0.29435, 1e-15);
  EXPECT_THROW(m.semantic_value_received(2, 0.0), std::invalid_argument);
}

TEST(SemanticValue, ForwardStaysPositiveAtMaxBer) {
  const auto m = model(Scheme::UncodedForward, Metric::Clip);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_GT(m.semantic_value_received(i, 0.5), 0.0);
    double prev = HUGE_VAL;
    for (int k = 0; k <= 100; ++k) {
      const double v = m.semantic_value_received(i, 0.005 * k);
      EXPECT_LE(v, prev);
      prev = v;
    }
  }
}

TEST(InvertSemanticValue, Discard) {
  const auto m = model(Scheme::CodedDiscard, Metric::Clip);
  EXPECT_EQ(m.invert_semantic_value(0, 0.5887), 0.0);
  EXPECT_EQ(m.invert_semantic_value(0, 0.0), 1.0);
  try {
    m.invert_semantic_value(0, 0.7);
    FAIL() << "expected infeasibility";
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.kind(), InfeasibleError::Kind::TooStrict);
    EXPECT_EQ(e.achievable(), 0.5887);
  }
}

TEST(InvertSemanticValue, RoundTripOnGrid) {
  for (Scheme s : {Scheme::UncodedForward, Scheme::CodedDiscard}) {
    const auto m = model(s, Metric::MsSsim);
    for (std::size_t i = 0; i < 2; ++i) {
      const double l = m.semantic_value(i);
      const double floor = m.semantic_value_received(i, m.max_error());
      for (int k = 0; k < 100; ++k) {
        const double target = floor + (l - floor) * (k + 0.5) / 100.0;
        const double e = m.invert_semantic_value(i, target);
        EXPECT_NEAR(m.semantic_value_received(i, e), target, 1e-9);
      }
      EXPECT_EQ(m.invert_semantic_value(i, 0.5 * floor), m.max_error());
    }
  }
}

TEST(ConstraintCurve, BoundaryConsistencyAndRoundTrip) {
  for (Scheme s : {Scheme::UncodedForward, Scheme::CodedDiscard}) {
    const auto m = model(s, Metric::Clip);
    const double phi1 = 0.2 * m.max_error();
    EXPECT_NEAR(m.solve_constraint_curve(0, phi1, m.evaluate(E{phi1, 0.0})), 0.0, 1e-10);
    EXPECT_NEAR(m.solve_constraint_curve(0, phi1, m.evaluate(E{phi1, m.max_error()})),
                m.max_error(), 1e-10);
  }
  const auto d = model(Scheme::CodedDiscard, Metric::Clip);
  const double psi2 = d.solve_constraint_curve(0, 0.2, 0.5);
  EXPECT_NEAR(perception_discard(d, E{0.2, psi2}), 0.5, 1e-10);
}

TEST(ConstraintCurve, ReportsWhichSideFailed) {
  const auto d = model(Scheme::CodedDiscard, Metric::Clip);
  try {
    d.solve_constraint_curve(0, 0.9, 0.35);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.kind(), InfeasibleError::Kind::TooStrict);
  }
  try {
    d.solve_constraint_curve(0, 0.0, 0.99);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.kind(), InfeasibleError::Kind::SatisfiedAtMaxError);
  }
}

TEST(ModelNames, RoundTrip) {
  EXPECT_EQ(parse_metric(to_string(Metric::MsSsim)), Metric::MsSsim);
  EXPECT_EQ(parse_scheme(to_string(Scheme::UncodedForward)), Scheme::UncodedForward);
  EXPECT_THROW(parse_metric("PSNR"), std::invalid_argument);
}
