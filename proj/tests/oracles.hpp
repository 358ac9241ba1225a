#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "semalloc/alloc.hpp"

// Brute-force references for the two-stream allocators. Both use only
// PerceptionModel::evaluate and objective_power, never the allocator code.
namespace oracle {

// Second-stream error on the constraint curve for a fixed first error, by
// plain bisection on evaluate(). Returns max error exactly when that already
// satisfies the target, and NaN when even zero error cannot.
inline double curve_second(const semalloc::PerceptionModel& m, double first, double p_bar) {
  const double max_e = m.max_error();
  if (m.evaluate(std::array<double, 2>{first, max_e}) <= p_bar) return max_e;
  if (m.evaluate(std::array<double, 2>{first, 0.0}) > p_bar) return std::nan("");
  double lo = 0.0;
  double hi = max_e;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (m.evaluate(std::array<double, 2>{first, mid}) <= p_bar) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// Minimum power over `points` evenly spaced first-stream errors, each paired
// with its constraint-curve partner.
inline double curve_grid_power(const semalloc::AllocationProblem& problem, int points = 400) {
  const auto& m = problem.model;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    const double t = m.max_error() * k / (points - 1);
    const double s = curve_second(m, t, problem.p_bar);
    if (std::isnan(s)) continue;
    best = std::min(best, semalloc::objective_power(problem, std::array<double, 2>{t, s}));
  }
  return best;
}

// Minimum power over a points x points grid of error pairs that satisfy the
// constraint.
inline double box_grid_power(const semalloc::AllocationProblem& problem, int points = 400) {
  const auto& m = problem.model;
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < points; ++a) {
    for (int b = 0; b < points; ++b) {
      const std::array<double, 2> e{m.max_error() * a / (points - 1),
                                    m.max_error() * b / (points - 1)};
      if (m.evaluate(e) > problem.p_bar) continue;
      best = std::min(best, semalloc::objective_power(problem, e));
    }
  }
  return best;
}

}  // namespace oracle
