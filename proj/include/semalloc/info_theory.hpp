#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Entropy and mutual-information formulas for bit streams sent over binary
// symmetric channels, with exact small-alphabet oracles. All logarithms are
// base 2.
namespace semalloc::info {

inline constexpr std::size_t kMaxJointAlphabet = 16;
inline constexpr std::size_t kMaxChainAlphabet = 8;

// Joint distribution of two discrete variables, row-major.
class JointPmf {
 public:
  // Throws std::domain_error unless all entries are >= 0, sum to 1 within
  // 1e-12 and both alphabets are between 1 and kMaxJointAlphabet.
  JointPmf(std::size_t rows, std::size_t cols, std::vector<double> probs);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return probs_[r * cols_ + c]; }

  std::vector<double> row_marginal() const;
  std::vector<double> col_marginal() const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> probs_;
};

// Row-stochastic transition matrix P(out | in).
class StochasticMatrix {
 public:
  // Throws std::domain_error if any row does not sum to 1 within 1e-12, any
  // entry is negative, or a dimension exceeds kMaxChainAlphabet.
  StochasticMatrix(std::size_t inputs, std::size_t outputs, std::vector<double> probs);

  std::size_t inputs() const { return inputs_; }
  std::size_t outputs() const { return outputs_; }
  double operator()(std::size_t in, std::size_t out) const { return probs_[in * outputs_ + out]; }

 private:
  std::size_t inputs_;
  std::size_t outputs_;
  std::vector<double> probs_;
};

// Independent Bernoulli bits; phi[j] is P(bit j = 1).
class BernoulliStream {
 public:
  explicit BernoulliStream(std::vector<double> phi);

  std::size_t length() const { return phi_.size(); }
  std::span<const double> phi() const { return phi_; }

  // Probability of one concrete bit pattern (product over bits).
  double sequence_probability(std::span<const bool> bits) const;
  // Entropy of the whole block in bits; additive over independent bits.
  double sequence_entropy() const;

 private:
  std::vector<double> phi_;
};

double binary_entropy(double p);

// Per-stream MI of the uncoded forward-with-error scheme, implemented as
// sum_j H(phi_j) - H(psi_j). Exact only for phi_j = 0.5; see mi_bsc_exact.
double mi_uncoded_lemma2(const BernoulliStream& stream, std::span<const double> ber);

// Exact single-bit MI of a Bernoulli(phi) source over a BSC(psi).
double mi_bsc_exact(double phi, double psi);

// Per-stream MI of the coded discard-with-error scheme: (1 - bler) * H.
double mi_coded_lemma2(double seq_prob_entropy, double bler);

// I(X;Y) by direct double sum.
double mi_joint(const JointPmf& pmf);

// Joint of (input, output) for a source pushed through a channel.
JointPmf compose_joint(std::span<const double> source, const StochasticMatrix& channel);

struct DpiReport {
  double i_xy;
  double i_xz;
  bool holds;
};

// X -> Y -> Z with Y = first(X), Z = second(Y).
DpiReport dpi_check(std::span<const double> source, const StochasticMatrix& first,
                    const StochasticMatrix& second);

}  // namespace semalloc::info
