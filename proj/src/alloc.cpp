#include "semalloc/alloc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/core.h>

#include "semalloc/errors.hpp"
#include "semalloc/numeric.hpp"

namespace semalloc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// P_bar this close to p_best is only reachable with error-free streams.
constexpr double kBestSlack = 1e-12;

double snr_for_error(const PerceptionModel& model, std::size_t i, double error, double cap) {
  const auto& s = model.stream(i);
  if (error >= model.max_error()) return 0.0;
  if (error <= 0.0) return cap;
  const double snr = model.scheme() == Scheme::UncodedForward
                         ? link::snr_from_ber(error)
                         : link::snr_from_bler(error, s.k_bits, s.n_symbols);
  return std::min(snr, cap);
}

double error_for_snr(const PerceptionModel& model, std::size_t i, double snr) {
  const auto& s = model.stream(i);
  return model.scheme() == Scheme::UncodedForward ? link::ber_bpsk(snr)
                                                  : link::bler_fbl(snr, s.k_bits, s.n_symbols);
}

AllocationResult finalize(const AllocationProblem& problem, Method method,
                          std::vector<double> errors, std::vector<double> snrs,
                          const AllocOptions& opts) {
  const auto& model = problem.model;
  AllocationResult r;
  r.method = method;
  r.error = std::move(errors);
  r.snr = std::move(snrs);
  r.power_w.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    r.power_w[i] = r.snr[i] * problem.realization.inverse_gain(i);
    r.total_power += unit_count(model, i) * r.power_w[i];
    if (r.snr[i] >= opts.snr_cap) r.near_infeasible = true;
  }
  r.achieved_p = model.evaluate(r.error);
  return r;
}

AllocationResult zero_power_result(const AllocationProblem& problem, Method method,
                                   const AllocOptions& opts) {
  const std::size_t n = problem.model.size();
  auto r = finalize(problem, method, std::vector<double>(n, problem.model.max_error()),
                    std::vector<double>(n, 0.0), opts);
  r.zero_power = true;
  return r;
}

AllocationResult capped_result(const AllocationProblem& problem, Method method,
                               const AllocOptions& opts) {
  const std::size_t n = problem.model.size();
  std::vector<double> errors(n);
  for (std::size_t i = 0; i < n; ++i) errors[i] = error_for_snr(problem.model, i, opts.snr_cap);
  auto r = finalize(problem, method, std::move(errors), std::vector<double>(n, opts.snr_cap), opts);
  r.near_infeasible = true;
  return r;
}

void check_problem(const AllocationProblem& problem) {
  if (problem.realization.size() != problem.model.size()) {
    throw std::invalid_argument("allocation: channel realization does not match stream count");
  }
  if (!std::isfinite(problem.p_bar)) throw std::invalid_argument("allocation: p_bar not finite");
}

// Handles the cases every method shares; returns true when `out` is final.
bool trivial_cases(const AllocationProblem& problem, Method method, const AllocOptions& opts,
                   AllocationResult& out) {
  check_problem(problem);
  const auto report = feasibility_report(problem);
  if (!report.feasible) {
    throw InfeasibleError(InfeasibleError::Kind::TooStrict, report.p_min,
                          report.describe(problem.p_bar));
  }
  if (report.zero_power_sufficient) {
    out = zero_power_result(problem, method, opts);
    return true;
  }
  if (problem.p_bar <= report.p_min + kBestSlack) {
    out = capped_result(problem, method, opts);
    return true;
  }
  return false;
}

// Point on the two-stream constraint curve with first error t.
std::array<double, 2> curve_point(const PerceptionModel& model, double t, double p_bar) {
  double second;
  try {
    second = model.solve_constraint_curve(0, t, p_bar);
  } catch (const InfeasibleError& e) {
    second = e.kind() == InfeasibleError::Kind::TooStrict ? 0.0 : model.max_error();
  }
  return {t, second};
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Unaware: return "unaware";
    case Method::Proportional: return "proportional";
    case Method::Bisection: return "bisection";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  if (text == "unaware") return Method::Unaware;
  if (text == "proportional") return Method::Proportional;
  if (text == "bisection") return Method::Bisection;
  throw std::invalid_argument(fmt::format("unknown method '{}'", text));
}

double unit_count(const PerceptionModel& model, std::size_t i) {
  const auto& s = model.stream(i);
  return model.scheme() == Scheme::UncodedForward ? s.k_bits : s.n_symbols;
}

std::string FeasibilityReport::describe(double p_bar) const {
  if (!feasible) {
    return fmt::format("infeasible: P_bar={:.9g} is below the best achievable perception {:.9g}",
                       p_bar, p_min);
  }
  if (zero_power_sufficient) {
    return fmt::format("P_bar={:.9g} is met with zero power (worst case {:.9g})", p_bar, p_max);
  }
  return fmt::format("feasible: P_bar={:.9g} within reachable range [{:.9g}, {:.9g}]", p_bar,
                     p_min, p_max);
}

FeasibilityReport feasibility_report(const AllocationProblem& problem) {
  const auto& model = problem.model;
  FeasibilityReport r;
  r.p_min = model.evaluate(std::vector<double>(model.size(), 0.0));
  r.p_max = model.evaluate(std::vector<double>(model.size(), model.max_error()));
  r.feasible = problem.p_bar >= r.p_min;
  r.zero_power_sufficient = problem.p_bar >= r.p_max;
  return r;
}

double objective_power(const AllocationProblem& problem, std::span<const double> errors,
                       const AllocOptions& opts) {
  double total = 0.0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    total += unit_count(problem.model, i) * problem.realization.inverse_gain(i) *
             snr_for_error(problem.model, i, errors[i], opts.snr_cap);
  }
  return total;
}

ObjectiveGradient objective_gradient(const AllocationProblem& problem,
                                     std::span<const double> errors) {
  const auto& model = problem.model;
  if (errors.size() != model.size()) {
    throw std::invalid_argument("objective_gradient: one error per stream required");
  }
  ObjectiveGradient g;
  g.partials.resize(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double e = errors[i];
    const double scale = unit_count(model, i) * problem.realization.inverse_gain(i);
    if (!(e >= 0.0 && e <= model.max_error())) {
      throw std::domain_error(fmt::format("objective_gradient: error {} out of range", e));
    }
    if (e == 0.0) {
      g.partials[i] = -kInf;
      g.boundary = true;
      continue;
    }
    if (model.scheme() == Scheme::UncodedForward) {
      // d/dpsi of Qinv(psi)^2 / 2.
      g.partials[i] = scale * link::q_inverse(e) * link::q_inverse_derivative(e);
      continue;
    }
    const auto& s = model.stream(i);
    auto snr_at = [&](double x) {
      return x >= 1.0 ? 0.0 : link::snr_from_bler(x, s.k_bits, s.n_symbols);
    };
    const double h = 1e-6 * e;
    if (e + h <= 1.0) {
      g.partials[i] = scale * (snr_at(e + h) - snr_at(e - h)) / (2.0 * h);
    } else {
      g.partials[i] = scale * (snr_at(e) - snr_at(e - h)) / h;
      g.boundary = true;
    }
  }
  return g;
}

AllocationResult allocate_unaware(const AllocationProblem& problem, const AllocOptions& opts) {
  AllocationResult out;
  if (trivial_cases(problem, Method::Unaware, opts, out)) return out;
  const auto& model = problem.model;
  const std::size_t n = model.size();
  std::vector<double> errors(n);
  auto perception_at = [&](double snr) {
    for (std::size_t i = 0; i < n; ++i) errors[i] = error_for_snr(model, i, snr);
    return model.evaluate(errors);
  };
  double lo = 1e-12;
  while (perception_at(lo) <= problem.p_bar && lo > 1e-300) lo *= 1e-6;
  if (perception_at(opts.snr_cap) > problem.p_bar) return capped_result(problem, Method::Unaware, opts);
  const double log_snr = numeric::bisect(
      [&](double u) { return problem.p_bar - perception_at(std::exp(u)); }, std::log(lo),
      std::log(opts.snr_cap));
  const double common = std::exp(log_snr);
  for (std::size_t i = 0; i < n; ++i) errors[i] = error_for_snr(model, i, common);
  return finalize(problem, Method::Unaware, errors, std::vector<double>(n, common), opts);
}

AllocationResult allocate_proportional(const AllocationProblem& problem,
                                       const AllocOptions& opts) {
  AllocationResult out;
  if (trivial_cases(problem, Method::Proportional, opts, out)) return out;
  const auto& model = problem.model;
  const std::size_t n = model.size();
  std::vector<double> errors(n);
  auto errors_at = [&](double ratio) {
    for (std::size_t i = 0; i < n; ++i) {
      errors[i] = model.invert_semantic_value(i, ratio * model.semantic_value(i));
    }
  };
  const double ratio = numeric::bisect(
      [&](double rho) {
        errors_at(rho);
        return problem.p_bar - model.evaluate(errors);
      },
      0.0, 1.0);
  errors_at(ratio);

  std::vector<double> snrs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = errors[i];
    if (e >= model.max_error()) {
      snrs[i] = 0.0;
    } else if (e <= 0.0) {
      snrs[i] = opts.snr_cap;
    } else if (model.scheme() == Scheme::UncodedForward) {
      snrs[i] = std::min(link::snr_from_ber(e), opts.snr_cap);
    } else {
      const auto& s = model.stream(i);
      const double q = link::power_coded_closed_form(e, s.k_bits, s.n_symbols,
                                                     problem.realization.gain_sq[i],
                                                     problem.realization.noise_w[i]);
      snrs[i] = std::min(q / problem.realization.inverse_gain(i), opts.snr_cap);
    }
  }
  return finalize(problem, Method::Proportional, errors, snrs, opts);
}

namespace {

struct CurveSearch {
  const AllocationProblem& problem;
  const AllocOptions& opts;

  std::array<double, 2> point(double t) const { return curve_point(problem.model, t, problem.p_bar); }

  double cost(const std::array<double, 2>& p) const { return objective_power(problem, p, opts); }

  // df/dPhi1 + (dPhi2/dPhi1) df/dPhi2 along the curve, with dPhi2/dPhi1
  // from implicit differentiation of the perception constraint.
  double directional(const std::array<double, 2>& p) const {
    if (p[0] <= 0.0) return -kInf;  // leaving an infinite-power edge
    if (p[1] <= 0.0) return kInf;   // approaching one
    const auto g = objective_gradient(problem, p);
    const double p1 = problem.model.partial(p, 0);
    const double p2 = problem.model.partial(p, 1);
    if (p2 == 0.0) return p1 == 0.0 ? g.partials[0] : kInf;
    return g.partials[0] - p1 / p2 * g.partials[1];
  }

  // Endpoint checks followed by bisection on the derivative sign.
  std::array<double, 2> bisect_segment(double left, double right) const {
    auto pl = point(left);
    auto pr = point(right);
    if (directional(pl) >= 0.0) return pl;
    if (directional(pr) <= 0.0) return pr;
    std::array<double, 2> mid_point = pl;
    while (right - left >= opts.bisection_tol) {
      const double mid = 0.5 * (left + right);
      if (mid <= left || mid >= right) break;
      mid_point = point(mid);
      if (directional(mid_point) >= 0.0) {
        right = mid;
      } else {
        left = mid;
      }
    }
    return mid_point;
  }
};

}  // namespace

AllocationResult allocate_bisection(const AllocationProblem& problem, const AllocOptions& opts) {
  if (problem.model.size() != 2) {
    throw std::invalid_argument("bisection allocation needs exactly two streams");
  }
  AllocationResult out;
  if (trivial_cases(problem, Method::Bisection, opts, out)) return out;
  const auto& model = problem.model;
  const double max_e = model.max_error();
  const double p_bar = problem.p_bar;

  // Constraint-curve endpoints: left has the largest second error.
  const bool second_off = model.evaluate(std::array<double, 2>{0.0, max_e}) <= p_bar;
  const double left = second_off ? model.solve_constraint_curve(1, max_e, p_bar) : 0.0;
  double right;
  if (model.evaluate(std::array<double, 2>{max_e, 0.0}) <= p_bar) {
    right = max_e;
  } else {
    right = model.solve_constraint_curve(1, 0.0, p_bar);
  }

  const CurveSearch search{problem, opts};
  std::vector<std::array<double, 2>> candidates;
  candidates.push_back(search.bisect_segment(left, right));

  // The objective need not be unimodal along the curve; bracket every
  // descent-to-ascent sign change and refine each one the same way.
  const int m = std::max(opts.scan_points, 1);
  std::vector<double> ts(m + 2);
  std::vector<double> ds(m + 2);
  for (int k = 0; k <= m + 1; ++k) {
    ts[k] = left + (right - left) * static_cast<double>(k) / (m + 1);
    ds[k] = search.directional(search.point(ts[k]));
  }
  for (int k = 0; k <= m; ++k) {
    if (ds[k] < 0.0 && ds[k + 1] >= 0.0) candidates.push_back(search.bisect_segment(ts[k], ts[k + 1]));
  }
  // Exact corners: an error of max_e costs nothing, while a curve solve may
  // land an ulp below it and pay for a barely-working link.
  candidates.push_back(second_off ? std::array<double, 2>{left, max_e} : search.point(left));
  candidates.push_back(search.point(right));

  const std::array<double, 2>* best = nullptr;
  double best_cost = kInf;
  for (const auto& c : candidates) {
    const double cost = search.cost(c);
    if (cost < best_cost) {
      best_cost = cost;
      best = &c;
    }
  }
  std::vector<double> errors(best->begin(), best->end());
  std::vector<double> snrs(2);
  for (std::size_t i = 0; i < 2; ++i) snrs[i] = snr_for_error(model, i, errors[i], opts.snr_cap);
  return finalize(problem, Method::Bisection, errors, snrs, opts);
}

AllocationResult allocate(Method method, const AllocationProblem& problem,
                          const AllocOptions& opts) {
  switch (method) {
    case Method::Unaware: return allocate_unaware(problem, opts);
    case Method::Proportional: return allocate_proportional(problem, opts);
    case Method::Bisection: return allocate_bisection(problem, opts);
  }
  throw std::invalid_argument("unknown allocation method");
}

}  // namespace semalloc
