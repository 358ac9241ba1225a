#pragma once

#include <cstdint>

namespace semalloc {

// Counter-derived random stream. The state for (seed, index) depends on
// nothing else, so realization i draws the same numbers whatever order or
// thread it runs on. Generator is SplitMix64.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Unit-mean exponential, i.e. |h~|^2 of a unit-variance complex Gaussian.
  double exponential();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_;
};

inline RngStream rng_stream(std::uint64_t seed, std::uint64_t index) {
  return RngStream(seed, index);
}

}  // namespace semalloc
