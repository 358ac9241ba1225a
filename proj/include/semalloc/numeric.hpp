#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "semalloc/errors.hpp"

namespace semalloc::numeric {

// Bisection for the zero of a function that changes sign on [lo, hi].
// Iterates until the midpoint is no longer representable between the
// endpoints, so the result is accurate to the last ulp of the bracket.
template <class F>
double bisect(F&& f, double lo, double hi, int max_iter = 300) {
  double f_lo = f(lo);
  double f_hi = f(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo < 0.0) == (f_hi < 0.0)) {
    throw BracketError("bisect: no sign change on bracket");
  }
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  return std::abs(f_lo) <= std::abs(f_hi) ? lo : hi;
}

// Pairwise summation; rounding error grows as O(log n) instead of O(n).
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace semalloc::numeric
