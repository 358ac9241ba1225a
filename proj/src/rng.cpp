#include "semalloc/rng.hpp"

#include <cmath>

namespace semalloc {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t index)
    : state_(mix64(mix64(seed + kGolden) ^ mix64(index * kGolden + 0x632BE59BD9B4E019ULL))) {}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::exponential() {
  // 1 - u lies in (0, 1], so the log is finite.
  return -std::log(1.0 - uniform());
}

}  // namespace semalloc
