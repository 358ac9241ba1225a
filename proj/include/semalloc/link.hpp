#pragma once

#include <cstddef>
#include <variant>
#include <vector>

namespace semalloc {

class RngStream;

namespace link {

// Tail probability of the standard normal.
double q_function(double x);
// Inverse of q_function on (0, 1); accurate to ~1e-15 relative.
double q_inverse(double p);
// d/dp q_inverse(p) = -sqrt(2 pi) exp(q_inverse(p)^2 / 2).
double q_inverse_derivative(double p);

double db_to_linear(double db);
double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

struct RayleighFading {};  // |h~|^2 ~ Exp(1)
struct FixedFading {
  std::vector<double> gain_sq;  // |h~|^2 per stream
};

struct ChannelParams {
  double distance_m = 100.0;
  double reference_distance_m = 1.0;
  double reference_path_loss_db = -30.0;
  // Loss convention: gain_dB = pl0 - 10 * exponent * log10(d / d0).
  double path_loss_exponent = 3.4;
  double noise_dbm = -110.0;
  std::variant<RayleighFading, FixedFading> fading = RayleighFading{};

  void validate() const;
};

struct ChannelRealization {
  std::vector<double> gain_sq;  // |h_i|^2 including path loss
  std::vector<double> noise_w;  // sigma_i^2

  std::size_t size() const { return gain_sq.size(); }
  // sigma_i^2 / |h_i|^2: watts per unit of SNR.
  double inverse_gain(std::size_t i) const { return noise_w[i] / gain_sq[i]; }
};

double path_loss_linear(const ChannelParams& params);

// Draws one realization for `streams` streams; Rayleigh draws consume the
// RNG, fixed fading does not.
ChannelRealization draw_realization(const ChannelParams& params, std::size_t streams,
                                    RngStream& rng);
// Realization with explicit small-scale gains |h~_i|^2.
ChannelRealization fixed_realization(const ChannelParams& params,
                                     const std::vector<double>& small_scale_gain_sq);

double snr(double power_w, const ChannelRealization& real, std::size_t stream);

// Uncoded BPSK bit error rate Q(sqrt(2 snr)).
double ber_bpsk(double snr);
// Inverse of ber_bpsk on (0, 0.5].
double snr_from_ber(double psi);

// Finite-blocklength block error rate
//   Q( ln2 * sqrt(N / V) * (C - K/N) ), C = log2(1 + snr), V = 1 - (1 + snr)^-2.
// Returns 1 at snr = 0.
double bler_fbl(double snr, double k_bits, double n_symbols);
// Unique snr with bler_fbl(snr, K, N) = target, target in (0, 1).
double snr_from_bler(double target, double k_bits, double n_symbols);

// Real root of (x - t1)(x - t2) e^x = a inside [lo, hi].
struct LambertWQuery {
  double t1;
  double t2;
  double a;
  double lo;
  double hi;
};
double glambertw(const LambertWQuery& query);

// Coded-scheme transmit power for a target BLER via the generalized
// Lambert W closed form. Equivalent to inverse_gain * snr_from_bler.
double power_coded_closed_form(double target_bler, double k_bits, double n_symbols,
                               double gain_sq, double noise_w);

}  // namespace link
}  // namespace semalloc
