#include "semalloc/perception.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include <fmt/core.h>

#include "semalloc/errors.hpp"
#include "semalloc/numeric.hpp"

namespace semalloc {

std::string_view to_string(Metric metric) {
  return metric == Metric::Clip ? "CLIP" : "MSSSIM";
}

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::UncodedForward ? "uncoded_forward" : "coded_discard";
}

Metric parse_metric(std::string_view text) {
  if (text == "CLIP" || text == "clip") return Metric::Clip;
  if (text == "MSSSIM" || text == "msssim" || text == "MS-SSIM") return Metric::MsSsim;
  throw std::invalid_argument(fmt::format("unknown metric '{}'", text));
}

Scheme parse_scheme(std::string_view text) {
  if (text == "uncoded_forward") return Scheme::UncodedForward;
  if (text == "coded_discard") return Scheme::CodedDiscard;
  throw std::invalid_argument(fmt::format("unknown scheme '{}'", text));
}

void ForwardShape::validate() const {
  if (!(midpoint > 0.0) || !(steepness > 0.0) || !(floor >= 0.0 && floor < 1.0)) {
    throw std::invalid_argument(fmt::format(
        "forward shape needs midpoint > 0, steepness > 0, floor in [0, 1); got {}, {}, {}",
        midpoint, steepness, floor));
  }
}

double quality_factor(const ForwardShape& shape, double ber) {
  if (!(ber >= 0.0 && ber <= kMaxBer)) {
    throw std::domain_error(fmt::format("quality_factor: BER {} outside [0, 0.5]", ber));
  }
  const double x = std::pow(ber / shape.midpoint, shape.steepness);
  return shape.floor + (1.0 - shape.floor) / (1.0 + x);
}

double quality_factor_derivative(const ForwardShape& shape, double ber) {
  const double ratio = ber / shape.midpoint;
  const double x = std::pow(ratio, shape.steepness);
  const double dx = shape.steepness * std::pow(ratio, shape.steepness - 1.0) / shape.midpoint;
  return -(1.0 - shape.floor) * dx / ((1.0 + x) * (1.0 + x));
}

void StreamProfile::validate() const {
  if (!(k_bits >= 1.0) || !(n_symbols >= k_bits)) {
    throw std::invalid_argument(
        fmt::format("stream '{}': need N >= K >= 1, got K={}, N={}", name, k_bits, n_symbols));
  }
  for (double l : semantic_value) {
    if (!(l > 0.0 && l <= 1.0)) {
      throw std::invalid_argument(
          fmt::format("stream '{}': semantic value {} outside (0, 1]", name, l));
    }
  }
  for (const auto& s : forward_shape) s.validate();
}

MetricPreset clip_preset() {
  MetricPreset p;
  p.metric = Metric::Clip;
  p.p_best = 0.3191;
  p.p_worst_uncoded = 0.8112;
  return p;
}

MetricPreset msssim_preset() {
  MetricPreset p;
  p.metric = Metric::MsSsim;
  p.p_best = 0.3313;
  p.p_worst_uncoded = 0.4720;
  return p;
}

MetricPreset default_preset(Metric metric) {
  return metric == Metric::Clip ? clip_preset() : msssim_preset();
}

std::vector<StreamProfile> default_streams() {
  StreamProfile prompt;
  prompt.name = "prompt";
  prompt.k_bits = 256;
  prompt.n_symbols = 320;
  prompt.semantic_value = {0.5887, 0.5465};
  prompt.forward_shape = {ForwardShape{0.02, 1.5, 0.05}, ForwardShape{0.02, 1.5, 0.05}};

  // The edge map is longer and degrades at lower BER.
  StreamProfile edge;
  edge.name = "edge";
  edge.k_bits = 2048;
  edge.n_symbols = 2560;
  edge.semantic_value = {0.3596, 0.6355};
  edge.forward_shape = {ForwardShape{0.005, 1.5, 0.05}, ForwardShape{0.005, 1.5, 0.05}};
  return {prompt, edge};
}

PerceptionModel::PerceptionModel(Scheme scheme, MetricPreset preset,
                                 std::vector<StreamProfile> streams)
    : scheme_(scheme), preset_(std::move(preset)), streams_(std::move(streams)) {
  const std::size_t n = streams_.size();
  if (n == 0 || n > kMaxStreams) {
    throw std::invalid_argument(fmt::format("perception model needs 1..{} streams", kMaxStreams));
  }
  for (const auto& s : streams_) s.validate();
  const double pb = preset_.p_best;
  const double pw = preset_.p_worst_uncoded;
  if (!(pb >= 0.0 && pb <= 1.0) || !(pw >= pb && pw <= 1.0)) {
    throw std::invalid_argument(
        fmt::format("preset {}: need 0 <= p_best <= p_worst_uncoded <= 1", to_string(metric())));
  }

  const unsigned full = (1u << n) - 1u;
  subset_.assign(full + 1u, 0.0);
  for (const auto& [mask, value] : preset_.subset_overrides) {
    if (mask > full) throw std::invalid_argument("subset override references unknown stream");
    if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("subset value outside [0, 1]");
  }
  for (unsigned mask = 0; mask <= full; ++mask) {
    const auto it = preset_.subset_overrides.find(mask);
    double derived;
    if (mask == 0) {
      derived = 1.0;
    } else if (mask == full) {
      derived = pb;
    } else if ((mask & (mask - 1u)) == 0u) {
      derived = 1.0 - semantic_value(static_cast<std::size_t>(std::countr_zero(mask)));
    } else {
      derived = 1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) derived = std::min(derived, 1.0 - semantic_value(i));
      derived = std::max(derived, pb);
    }
    if (it != preset_.subset_overrides.end()) {
      const bool pinned = mask == 0 || mask == full || (mask & (mask - 1u)) == 0u;
      if (pinned && std::abs(it->second - derived) > 1e-12) {
        throw std::invalid_argument(fmt::format(
            "subset {:#x}: value {} contradicts the semantic values / endpoints ({})", mask,
            it->second, derived));
      }
      subset_[mask] = it->second;
    } else {
      subset_[mask] = derived;
    }
  }
  for (unsigned mask = 0; mask <= full; ++mask) {
    if (subset_[mask] < pb - 1e-15) {
      throw std::invalid_argument(fmt::format("subset {:#x}: perception below p_best", mask));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned bigger = mask | (1u << i);
      if (subset_[bigger] > subset_[mask] + 1e-15) {
        throw std::invalid_argument(fmt::format(
            "subset perception not monotone: adding stream {} to {:#x} increases distance", i, mask));
      }
    }
  }

  if (!preset_.p_worst_stream.empty() && preset_.p_worst_stream.size() != n) {
    throw std::invalid_argument("p_worst_stream must list one value per stream");
  }
  u_at_max_.resize(n);
  stream_floor_.resize(n);
  prod_u_at_max_ = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    u_at_max_[i] = quality_factor(streams_[i].shape(metric()), kMaxBer);
    prod_u_at_max_ *= u_at_max_[i];
    const double worst = preset_.p_worst_stream.empty() ? pw : preset_.p_worst_stream[i];
    const double l = semantic_value(i);
    if (!(worst <= 1.0) || worst < 1.0 - l - 1e-15) {
      throw std::invalid_argument(fmt::format(
          "stream '{}': worst single-stream perception {} must lie in [1 - L, 1] = [{}, 1]",
          streams_[i].name, worst, 1.0 - l));
    }
    stream_floor_[i] = (1.0 - worst) / l;
  }
}

void PerceptionModel::check_errors(std::span<const double> errors) const {
  if (errors.size() != streams_.size()) {
    throw std::invalid_argument(
        fmt::format("expected {} error values, got {}", streams_.size(), errors.size()));
  }
  for (double e : errors) {
    if (!(e >= 0.0 && e <= max_error())) {
      throw std::domain_error(fmt::format("error level {} outside [0, {}]", e, max_error()));
    }
  }
}

double PerceptionModel::p_at_max_error() const {
  return scheme_ == Scheme::UncodedForward ? preset_.p_worst_uncoded : subset_[0];
}

double PerceptionModel::evaluate(std::span<const double> errors) const {
  return scheme_ == Scheme::UncodedForward ? forward(errors) : discard(errors);
}

double PerceptionModel::forward(std::span<const double> bers) const {
  if (bers.size() != streams_.size()) {
    throw std::invalid_argument(
        fmt::format("expected {} BER values, got {}", streams_.size(), bers.size()));
  }
  double prod_u = 1.0;
  for (std::size_t i = 0; i < bers.size(); ++i) {
    prod_u *= quality_factor(streams_[i].shape(metric()), bers[i]);
  }
  const double w = (prod_u - prod_u_at_max_) / (1.0 - prod_u_at_max_);
  const double pw = preset_.p_worst_uncoded;
  return pw - (pw - preset_.p_best) * w;
}

double PerceptionModel::discard(std::span<const double> blers) const {
  if (blers.size() != streams_.size()) {
    throw std::invalid_argument(
        fmt::format("expected {} BLER values, got {}", streams_.size(), blers.size()));
  }
  for (double b : blers) {
    if (!(b >= 0.0 && b <= 1.0)) throw std::domain_error(fmt::format("BLER {} outside [0, 1]", b));
  }
  const std::size_t n = blers.size();
  double p = 0.0;
  for (unsigned mask = 0; mask < subset_.size(); ++mask) {
    double weight = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      weight *= (mask & (1u << i)) ? 1.0 - blers[i] : blers[i];
    }
    p += weight * subset_[mask];
  }
  return p;
}

double PerceptionModel::partial(std::span<const double> errors, std::size_t i) const {
  check_errors(errors);
  if (i >= streams_.size()) throw std::invalid_argument("partial: stream index out of range");
  if (scheme_ == Scheme::CodedDiscard) {
    // Multilinear: the partial is the difference of the two faces.
    std::vector<double> at(errors.begin(), errors.end());
    at[i] = 1.0;
    const double hi = discard(at);
    at[i] = 0.0;
    return hi - discard(at);
  }
  double others = 1.0;
  for (std::size_t j = 0; j < errors.size(); ++j) {
    if (j != i) others *= quality_factor(streams_[j].shape(metric()), errors[j]);
  }
  const double du = quality_factor_derivative(streams_[i].shape(metric()), errors[i]);
  return -(preset_.p_worst_uncoded - preset_.p_best) / (1.0 - prod_u_at_max_) * others * du;
}

double PerceptionModel::semantic_value_received(std::size_t i, double error) const {
  if (i >= streams_.size()) throw std::invalid_argument("stream index out of range");
  if (!(error >= 0.0 && error <= max_error())) {
    throw std::domain_error(fmt::format("error level {} outside [0, {}]", error, max_error()));
  }
  const double l = semantic_value(i);
  if (scheme_ == Scheme::CodedDiscard) return (1.0 - error) * l;
  const double u = quality_factor(streams_[i].shape(metric()), error);
  const double normalized = (u - u_at_max_[i]) / (1.0 - u_at_max_[i]);
  const double r = stream_floor_[i];
  return l * (r + (1.0 - r) * normalized);
}

double PerceptionModel::invert_semantic_value(std::size_t i, double target) const {
  if (i >= streams_.size()) throw std::invalid_argument("stream index out of range");
  const double l = semantic_value(i);
  if (!(target >= 0.0)) throw std::domain_error("invert_semantic_value: negative target");
  if (target > l) {
    throw InfeasibleError(InfeasibleError::Kind::TooStrict, l,
                          fmt::format("semantic value {} exceeds the stream maximum {}", target, l));
  }
  if (target == l) return 0.0;
  if (scheme_ == Scheme::CodedDiscard) return 1.0 - target / l;
  if (target <= semantic_value_received(i, kMaxBer)) return kMaxBer;
  return numeric::bisect([&](double psi) { return semantic_value_received(i, psi) - target; },
                         0.0, kMaxBer);
}

double PerceptionModel::solve_constraint_curve(std::size_t fixed_index, double fixed_error,
                                               double target_p) const {
  if (streams_.size() != 2 || fixed_index > 1) {
    throw std::invalid_argument("solve_constraint_curve needs a two-stream model");
  }
  const std::size_t free_index = 1 - fixed_index;
  std::array<double, 2> e{};
  e[fixed_index] = fixed_error;
  auto at = [&](double free_error) {
    e[free_index] = free_error;
    return evaluate(e);
  };
  const double p_lo = at(0.0);
  const double p_hi = at(max_error());
  if (target_p < p_lo) {
    throw InfeasibleError(InfeasibleError::Kind::TooStrict, p_lo,
                          fmt::format("target {} below {} reachable with zero error", target_p, p_lo));
  }
  if (target_p > p_hi) {
    throw InfeasibleError(
        InfeasibleError::Kind::SatisfiedAtMaxError, p_hi,
        fmt::format("target {} already met at maximal error ({})", target_p, p_hi));
  }
  if (target_p == p_hi) return max_error();
  if (target_p == p_lo) return 0.0;
  if (scheme_ == Scheme::CodedDiscard) {
    // Affine in the free coordinate.
    return std::clamp((target_p - p_lo) / (p_hi - p_lo), 0.0, 1.0);
  }
  return numeric::bisect([&](double x) { return at(x) - target_p; }, 0.0, max_error());
}

double perception_forward(const PerceptionModel& model, std::span<const double> bers) {
  if (model.scheme() != Scheme::UncodedForward) {
    throw std::invalid_argument("perception_forward needs an uncoded forward-with-error model");
  }
  return model.forward(bers);
}

double perception_discard(const PerceptionModel& model, std::span<const double> blers) {
  if (model.scheme() != Scheme::CodedDiscard) {
    throw std::invalid_argument("perception_discard needs a coded discard-with-error model");
  }
  return model.discard(blers);
}

}  // namespace semalloc
