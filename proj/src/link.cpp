#include "semalloc/link.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/core.h>

#include "semalloc/errors.hpp"
#include "semalloc/numeric.hpp"
#include "semalloc/rng.hpp"

namespace semalloc::link {
namespace {

constexpr double kLn2 = std::numbers::ln2;

// Acklam's rational approximation of the standard normal quantile,
// ~1e-9 relative; used only as the starting point for refinement.
double normal_quantile_guess(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Q-function argument of the finite-blocklength bound.
double fbl_argument(double snr, double k_bits, double n_symbols) {
  const double log1p_snr = std::log1p(snr);
  const double dispersion = -std::expm1(-2.0 * log1p_snr);
  return std::sqrt(n_symbols / dispersion) * (log1p_snr - kLn2 * k_bits / n_symbols);
}

void check_block(double k_bits, double n_symbols) {
  if (!(k_bits >= 1.0 && n_symbols >= k_bits)) {
    throw std::domain_error(fmt::format("need N >= K >= 1, got K={}, N={}", k_bits, n_symbols));
  }
}

}  // namespace

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double q_inverse(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error(fmt::format("q_inverse: {} outside (0, 1)", p));
  }
  // 1 - p is exact for p in [0.5, 1), so fold onto the upper tail.
  if (p > 0.5) return -q_inverse(1.0 - p);
  if (p == 0.5) return 0.0;
  double x = -normal_quantile_guess(p);
  // Halley refinement on Q(x) - p; Q' = -pdf, Q'' = x * pdf.
  for (int it = 0; it < 4; ++it) {
    const double err = q_function(x) - p;
    const double t = err / (-normal_pdf(x));
    const double step = t / (1.0 + 0.5 * x * t);
    x -= step;
    if (std::abs(step) <= 1e-16 * std::abs(x)) break;
  }
  return x;
}

double q_inverse_derivative(double p) {
  const double x = q_inverse(p);
  return -std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double watts) {
  return watts > 0.0 ? 10.0 * std::log10(watts) + 30.0 : -std::numeric_limits<double>::infinity();
}

void ChannelParams::validate() const {
  if (!(distance_m > 0.0) || !(reference_distance_m > 0.0)) {
    throw std::invalid_argument("channel: distances must be positive");
  }
  if (!(path_loss_exponent > 0.0)) {
    throw std::invalid_argument("channel: path_loss_exponent must be positive (loss convention)");
  }
  if (!std::isfinite(noise_dbm) || !std::isfinite(reference_path_loss_db)) {
    throw std::invalid_argument("channel: noise and reference loss must be finite");
  }
  if (const auto* fixed = std::get_if<FixedFading>(&fading)) {
    for (double g : fixed->gain_sq) {
      if (!(g > 0.0)) throw std::invalid_argument("channel: fixed gains must be positive");
    }
  }
}

double path_loss_linear(const ChannelParams& params) {
  const double gain_db = params.reference_path_loss_db -
                         10.0 * params.path_loss_exponent *
                             std::log10(params.distance_m / params.reference_distance_m);
  return db_to_linear(gain_db);
}

ChannelRealization fixed_realization(const ChannelParams& params,
                                     const std::vector<double>& small_scale_gain_sq) {
  const double pl = path_loss_linear(params);
  const double noise = dbm_to_watts(params.noise_dbm);
  ChannelRealization real;
  for (double g : small_scale_gain_sq) {
    if (!(g > 0.0)) throw std::invalid_argument("fixed_realization: gains must be positive");
    real.gain_sq.push_back(pl * g);
    real.noise_w.push_back(noise);
  }
  return real;
}

ChannelRealization draw_realization(const ChannelParams& params, std::size_t streams,
                                    RngStream& rng) {
  if (const auto* fixed = std::get_if<FixedFading>(&params.fading)) {
    if (fixed->gain_sq.size() != streams) {
      throw std::invalid_argument("draw_realization: fixed gain count does not match streams");
    }
    return fixed_realization(params, fixed->gain_sq);
  }
  std::vector<double> small(streams);
  for (auto& g : small) {
    do {
      g = rng.exponential();
    } while (g <= 0.0);
  }
  return fixed_realization(params, small);
}

double snr(double power_w, const ChannelRealization& real, std::size_t stream) {
  return power_w * real.gain_sq.at(stream) / real.noise_w.at(stream);
}

double ber_bpsk(double snr) {
  if (!(snr >= 0.0)) throw std::domain_error(fmt::format("ber_bpsk: negative snr {}", snr));
  return q_function(std::sqrt(2.0 * snr));
}

double snr_from_ber(double psi) {
  if (!(psi > 0.0 && psi <= 0.5)) {
    throw std::domain_error(fmt::format("snr_from_ber: BER {} outside (0, 0.5]", psi));
  }
  const double x = q_inverse(psi);
  return 0.5 * x * x;
}

double bler_fbl(double snr, double k_bits, double n_symbols) {
  check_block(k_bits, n_symbols);
  if (!(snr >= 0.0)) throw std::domain_error("bler_fbl: negative snr");
  // Dispersion vanishes at snr = 0 while C < K/N, so the bound tends to 1.
  if (snr == 0.0) return 1.0;
  return q_function(fbl_argument(snr, k_bits, n_symbols));
}

double snr_from_bler(double target, double k_bits, double n_symbols) {
  check_block(k_bits, n_symbols);
  if (!(target > 0.0 && target < 1.0)) {
    throw std::domain_error(fmt::format("snr_from_bler: target {} outside (0, 1)", target));
  }
  const double z = q_inverse(target);
  auto residual = [&](double log_snr) {
    return fbl_argument(std::exp(log_snr), k_bits, n_symbols) - z;
  };
  double lo = std::log(1e-9);
  double hi = std::log(1e9);
  while (residual(lo) > 0.0 && lo > -690.0) lo -= std::log(1e3);
  while (residual(hi) < 0.0 && hi < 690.0) hi += std::log(1e3);
  return std::exp(numeric::bisect(residual, lo, hi));
}

double glambertw(const LambertWQuery& query) {
  auto residual = [&](double x) {
    return (x - query.t1) * (x - query.t2) * std::exp(x) - query.a;
  };
  const double r_lo = residual(query.lo);
  const double r_hi = residual(query.hi);
  if (r_lo != 0.0 && r_hi != 0.0 && (r_lo < 0.0) == (r_hi < 0.0)) {
    throw BracketError(fmt::format("glambertw: no sign change on [{}, {}]", query.lo, query.hi));
  }
  // Bisection to a 1e-3 wide bracket, then Illinois false position.
  double lo = query.lo, hi = query.hi, f_lo = r_lo, f_hi = r_hi;
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = residual(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    const double x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(x > lo && x < hi)) break;
    const double f_x = residual(x);
    if (f_x == 0.0) return x;
    if ((f_x < 0.0) == (f_lo < 0.0)) {
      lo = x;
      f_lo = f_x;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = x;
      f_hi = f_x;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  // Finish to the last ulp; false position can stall one-sided.
  return numeric::bisect(residual, lo, hi);
}

double power_coded_closed_form(double target_bler, double k_bits, double n_symbols,
                               double gain_sq, double noise_w) {
  check_block(k_bits, n_symbols);
  if (!(target_bler > 0.0 && target_bler < 1.0)) {
    throw std::domain_error(
        fmt::format("power_coded_closed_form: target {} outside (0, 1)", target_bler));
  }
  if (!(gain_sq > 0.0 && noise_w > 0.0)) {
    throw std::domain_error("power_coded_closed_form: gain and noise must be positive");
  }
  const double rate_nats = kLn2 * k_bits / n_symbols;
  const double alpha = q_inverse(target_bler) / std::sqrt(n_symbols);
  // eta = ln((1 + snr) e^{-rate}) solves (2 eta - 2 alpha)(2 eta + 2 alpha) e^{2 eta}
  // = -4 beta^2 alpha^2 with beta = e^{-rate}; its root lies between 0 and 2 alpha.
  double eta = 0.0;
  if (alpha != 0.0) {
    const LambertWQuery query{2.0 * alpha, -2.0 * alpha,
                              -4.0 * std::exp(-2.0 * rate_nats) * alpha * alpha,
                              std::min(0.0, 2.0 * alpha), std::max(0.0, 2.0 * alpha)};
    eta = 0.5 * glambertw(query);
  }
  return noise_w / gain_sq * std::expm1(rate_nats + eta);
}

}  // namespace semalloc::link
