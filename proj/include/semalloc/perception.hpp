#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semalloc {

enum class Metric { Clip = 0, MsSsim = 1 };
enum class Scheme { UncodedForward, CodedDiscard };

std::string_view to_string(Metric metric);
std::string_view to_string(Scheme scheme);
Metric parse_metric(std::string_view text);
Scheme parse_scheme(std::string_view text);

inline constexpr double kMaxBer = 0.5;
inline constexpr std::size_t kMaxStreams = 8;

// Logistic-in-BER quality factor u(psi) = floor + (1 - floor) / (1 + (psi/m)^k).
struct ForwardShape {
  double midpoint = 0.01;
  double steepness = 1.5;
  double floor = 0.05;

  void validate() const;
};

double quality_factor(const ForwardShape& shape, double ber);
// d u / d psi.
double quality_factor_derivative(const ForwardShape& shape, double ber);

struct StreamProfile {
  std::string name;
  double k_bits = 1.0;
  double n_symbols = 1.0;
  std::array<double, 2> semantic_value{};    // L per metric
  std::array<ForwardShape, 2> forward_shape{};

  double semantic(Metric m) const { return semantic_value[static_cast<int>(m)]; }
  const ForwardShape& shape(Metric m) const { return forward_shape[static_cast<int>(m)]; }
  void validate() const;
};

struct MetricPreset {
  Metric metric = Metric::Clip;
  double p_best = 0.0;
  double p_worst_uncoded = 1.0;
  // Base perception for specific stream subsets, keyed by bitmask. The empty
  // set, the full set and singletons are derived when absent.
  std::map<unsigned, double> subset_overrides;
  // Worst single-stream perception under the uncoded scheme; empty means
  // p_worst_uncoded for every stream.
  std::vector<double> p_worst_stream;
};

MetricPreset clip_preset();
MetricPreset msssim_preset();
MetricPreset default_preset(Metric metric);
// Textual prompt (index 0) and edge map (index 1) streams.
std::vector<StreamProfile> default_streams();

// Joint perception-error function of one scheme and metric. Immutable after
// construction; evaluation is non-decreasing in every error argument and lies
// in [p_best, 1].
class PerceptionModel {
 public:
  PerceptionModel(Scheme scheme, MetricPreset preset, std::vector<StreamProfile> streams);

  Scheme scheme() const { return scheme_; }
  Metric metric() const { return preset_.metric; }
  const MetricPreset& preset() const { return preset_; }
  std::size_t size() const { return streams_.size(); }
  const StreamProfile& stream(std::size_t i) const { return streams_.at(i); }
  const std::vector<StreamProfile>& streams() const { return streams_; }

  double p_best() const { return preset_.p_best; }
  // Largest error level: BER 0.5 or BLER 1.
  double max_error() const { return scheme_ == Scheme::UncodedForward ? kMaxBer : 1.0; }
  // Perception with every stream at max_error().
  double p_at_max_error() const;
  double subset_perception(unsigned mask) const { return subset_.at(mask); }
  // Semantic value L_i of stream i under the model's metric.
  double semantic_value(std::size_t i) const { return stream(i).semantic(metric()); }

  double evaluate(std::span<const double> errors) const;
  double forward(std::span<const double> bers) const;
  double discard(std::span<const double> blers) const;
  // Partial derivative of evaluate() with respect to errors[i].
  double partial(std::span<const double> errors, std::size_t i) const;

  double semantic_value_received(std::size_t i, double error) const;
  // Error level at which stream i retains `target` semantic value. Targets
  // below the value at max_error() saturate to max_error().
  double invert_semantic_value(std::size_t i, double target) const;
  // Two-stream models: error of the other stream so that the joint
  // perception equals target_p while stream fixed_index sits at fixed_error.
  double solve_constraint_curve(std::size_t fixed_index, double fixed_error,
                                double target_p) const;

 private:
  void check_errors(std::span<const double> errors) const;

  Scheme scheme_;
  MetricPreset preset_;
  std::vector<StreamProfile> streams_;
  std::vector<double> subset_;       // indexed by bitmask
  std::vector<double> u_at_max_;     // quality factor at BER 0.5
  std::vector<double> stream_floor_; // normalized single-stream value at BER 0.5
  double prod_u_at_max_ = 0.0;
};

double perception_forward(const PerceptionModel& model, std::span<const double> bers);
double perception_discard(const PerceptionModel& model, std::span<const double> blers);

}  // namespace semalloc
