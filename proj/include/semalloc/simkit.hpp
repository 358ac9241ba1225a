#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semalloc/alloc.hpp"
#include "semalloc/link.hpp"
#include "semalloc/perception.hpp"

namespace semalloc::sim {

enum class ExperimentKind { PowerVsPbar, PerBitPower, ErrorAndCapacity, PerceptionCdf, LinkValidate };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view text);
// Output file for an experiment kind, e.g. "power_vs_pbar.csv".
std::string_view csv_file_name(ExperimentKind kind);

struct LinkValidateParams {
  std::vector<double> ber_grid{0.001, 0.01, 0.1};
  std::size_t n_blocks = 100000;
  std::size_t block_bits = 100;
  // Discard-receiver check: one BER shared by both streams, lengths taken
  // from the stream profiles.
  double mixture_ber = 1e-3;
};

struct ExperimentSpec {
  std::string name;
  ExperimentKind kind = ExperimentKind::PowerVsPbar;
  Scheme scheme = Scheme::CodedDiscard;
  Metric metric = Metric::Clip;
  std::vector<double> p_bar_grid;
  std::vector<double> power_budget_grid;
  std::size_t n_realizations = 1000;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::Unaware, Method::Proportional, Method::Bisection};
  unsigned threads = 0;  // 0: hardware concurrency
  LinkValidateParams link;

  void validate() const;
};

// Everything an experiment needs besides its own spec.
struct SimContext {
  std::vector<StreamProfile> streams = default_streams();
  link::ChannelParams channel;
  std::array<MetricPreset, 2> presets{clip_preset(), msssim_preset()};
  AllocOptions alloc;

  PerceptionModel model(Scheme scheme, Metric metric) const;
};

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index must
// write only its own output slot.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

struct RunRecord {
  std::size_t realization = 0;
  std::vector<double> gain_sq;
  // One entry per spec method; empty when p_bar is infeasible.
  std::vector<std::optional<AllocationResult>> results;
  // log2(1 + snr_i) per method and stream; empty alongside an empty result.
  std::vector<std::vector<double>> capacity;
};

struct Sweep {
  std::vector<double> p_bar;
  std::vector<Method> methods;
  std::size_t streams = 0;
  // records[p][r]
  std::vector<std::vector<RunRecord>> records;
};

Sweep run_sweep(const SimContext& ctx, const ExperimentSpec& spec);

struct PowerRow {
  double p_bar;
  Method method;
  double mean_total_power_w;
  double stderr_w;
  std::size_t n_feasible;
};

struct PerBitRow {
  double p_bar;
  Method method;
  std::size_t stream;
  double mean_power_per_bit_w;
  std::size_t n_zero_power;
};

struct ErrorCapacityRow {
  double p_bar;
  Method method;
  std::size_t stream;
  double mean_error;
  double mean_capacity;
};

struct CdfRow {
  double budget_w;
  Method method;
  double quantile;
  double perception;
};

struct LinkCheck {
  std::string name;
  double observed;
  double expected;
  double tolerance;
  bool passed;
};

struct LinkValidateReport {
  std::vector<LinkCheck> checks;
  bool passed() const;
};

std::vector<PowerRow> aggregate_power(const Sweep& sweep);
std::vector<PerBitRow> aggregate_per_bit(const Sweep& sweep, const PerceptionModel& model);
std::vector<ErrorCapacityRow> aggregate_error_capacity(const Sweep& sweep);

std::vector<PowerRow> run_power_vs_pbar(const SimContext& ctx, const ExperimentSpec& spec);
std::vector<PerBitRow> run_per_bit_power(const SimContext& ctx, const ExperimentSpec& spec);
std::vector<ErrorCapacityRow> run_error_capacity(const SimContext& ctx, const ExperimentSpec& spec);
std::vector<CdfRow> run_perception_cdf(const SimContext& ctx, const ExperimentSpec& spec);
LinkValidateReport run_link_validate(const SimContext& ctx, const ExperimentSpec& spec);

// Smallest p_bar whose required total power fits in the budget.
double achieved_perception(const PerceptionModel& model, const link::ChannelRealization& real,
                           Method method, double budget_w, const AllocOptions& opts);

// Empirical quantile (inverse CDF, lower order statistic) of sorted data.
double empirical_quantile(std::span<const double> sorted, double q);

std::string to_csv(std::span<const PowerRow> rows);
std::string to_csv(std::span<const PerBitRow> rows);
std::string to_csv(std::span<const ErrorCapacityRow> rows);
std::string to_csv(std::span<const CdfRow> rows);
std::string to_csv(const LinkValidateReport& report);

// Runs any experiment kind and renders its CSV.
std::string run_to_csv(const SimContext& ctx, const ExperimentSpec& spec);

inline constexpr std::string_view kPowerHeader =
    "pbar,method,mean_total_power_w,stderr_w,n_feasible";
inline constexpr std::string_view kPerBitHeader =
    "pbar,method,stream,mean_power_per_bit_w,n_zero_power";
inline constexpr std::string_view kErrorCapacityHeader =
    "pbar,method,stream,mean_error,mean_capacity";
inline constexpr std::string_view kCdfHeader = "budget_w,method,quantile,perception";
inline constexpr std::string_view kLinkHeader = "check,observed,expected,tolerance,pass";

}  // namespace semalloc::sim
