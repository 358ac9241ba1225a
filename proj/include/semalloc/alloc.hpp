#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semalloc/link.hpp"
#include "semalloc/perception.hpp"

namespace semalloc {

enum class Method { Unaware, Proportional, Bisection };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

// Minimize total transmit power subject to perception <= p_bar.
struct AllocationProblem {
  const PerceptionModel& model;
  const link::ChannelRealization& realization;
  double p_bar;
};

struct AllocOptions {
  // SNR ceiling for every root search; reaching it flags near-infeasibility.
  double snr_cap = 1e9;
  // Stopping width of the bisection on the first error coordinate.
  double bisection_tol = 1e-6;
  // Interior probes of the directional derivative along the constraint
  // curve, used to bracket every local minimum.
  int scan_points = 32;
};

struct AllocationResult {
  Method method = Method::Unaware;
  std::vector<double> power_w;  // q_i
  std::vector<double> error;    // psi_i or Psi_i at the operating point
  std::vector<double> snr;      // received snr_i
  double achieved_p = 0.0;
  // sum K_i q_i (uncoded) or sum N_i q_i (coded)
  double total_power = 0.0;
  bool zero_power = false;       // p_bar met with every stream switched off
  bool near_infeasible = false;  // some stream hit the SNR cap
};

struct FeasibilityReport {
  bool feasible = false;
  bool zero_power_sufficient = false;
  double p_min = 0.0;  // perception with error-free streams
  double p_max = 0.0;  // perception with every stream at maximal error

  std::string describe(double p_bar) const;
};

FeasibilityReport feasibility_report(const AllocationProblem& problem);

// Common received SNR for all streams.
AllocationResult allocate_unaware(const AllocationProblem& problem, const AllocOptions& opts = {});
// Per-stream semantic-value targets rho * L_i with a common ratio rho.
AllocationResult allocate_proportional(const AllocationProblem& problem,
                                       const AllocOptions& opts = {});
// Bisection along the two-stream constraint curve on the sign of the
// directional derivative of the power objective.
AllocationResult allocate_bisection(const AllocationProblem& problem, const AllocOptions& opts = {});

AllocationResult allocate(Method method, const AllocationProblem& problem,
                          const AllocOptions& opts = {});

struct ObjectiveGradient {
  std::vector<double> partials;  // d(total power) / d(error_i)
  bool boundary = false;         // one-sided or infinite at an edge
};

ObjectiveGradient objective_gradient(const AllocationProblem& problem,
                                     std::span<const double> errors);

// Total power needed to operate at the given error levels.
double objective_power(const AllocationProblem& problem, std::span<const double> errors,
                       const AllocOptions& opts = {});

// Units per stream in the power objective: K_i (uncoded) or N_i (coded).
double unit_count(const PerceptionModel& model, std::size_t i);

}  // namespace semalloc
