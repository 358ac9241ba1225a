#include "semalloc/info_theory.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/core.h>
#include <vector>

#include "semalloc/numeric.hpp"

namespace semalloc::info {
namespace {

constexpr double kSumTol = 1e-12;

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error(fmt::format("{}: probability {} outside [0, 1]", what, p));
  }
}

void check_ber(double psi, const char* what) {
  if (!(psi >= 0.0 && psi <= 0.5)) {
    throw std::domain_error(fmt::format("{}: BER {} outside [0, 0.5]", what, psi));
  }
}

}  // namespace

JointPmf::JointPmf(std::size_t rows, std::size_t cols, std::vector<double> probs)
    : rows_(rows), cols_(cols), probs_(std::move(probs)) {
  if (rows_ == 0 || cols_ == 0 || rows_ > kMaxJointAlphabet || cols_ > kMaxJointAlphabet) {
    throw std::domain_error(
        fmt::format("JointPmf: alphabet {}x{} outside 1..{}", rows_, cols_, kMaxJointAlphabet));
  }
  if (probs_.size() != rows_ * cols_) {
    throw std::domain_error("JointPmf: size does not match dimensions");
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw std::domain_error("JointPmf: negative or NaN entry");
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTol) {
    throw std::domain_error(fmt::format("JointPmf: entries sum to {:.17g}", total));
  }
}

std::vector<double> JointPmf::row_marginal() const {
  std::vector<double> m(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) m[r] += (*this)(r, c);
  return m;
}

std::vector<double> JointPmf::col_marginal() const {
  std::vector<double> m(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) m[c] += (*this)(r, c);
  return m;
}

StochasticMatrix::StochasticMatrix(std::size_t inputs, std::size_t outputs,
                                   std::vector<double> probs)
    : inputs_(inputs), outputs_(outputs), probs_(std::move(probs)) {
  if (inputs_ == 0 || outputs_ == 0 || inputs_ > kMaxChainAlphabet ||
      outputs_ > kMaxChainAlphabet) {
    throw std::domain_error("StochasticMatrix: alphabet size outside 1..8");
  }
  if (probs_.size() != inputs_ * outputs_) {
    throw std::domain_error("StochasticMatrix: size does not match dimensions");
  }
  for (std::size_t i = 0; i < inputs_; ++i) {
    double row = 0.0;
    for (std::size_t o = 0; o < outputs_; ++o) {
      const double p = (*this)(i, o);
      if (!(p >= 0.0)) throw std::domain_error("StochasticMatrix: negative or NaN entry");
      row += p;
    }
    if (std::abs(row - 1.0) > kSumTol) {
      throw std::domain_error(fmt::format("StochasticMatrix: row {} sums to {:.17g}", i, row));
    }
  }
}

BernoulliStream::BernoulliStream(std::vector<double> phi) : phi_(std::move(phi)) {
  if (phi_.empty()) throw std::domain_error("BernoulliStream: empty stream");
  for (double p : phi_) check_probability(p, "BernoulliStream");
}

double BernoulliStream::sequence_probability(std::span<const bool> bits) const {
  if (bits.size() != phi_.size()) {
    throw std::invalid_argument("BernoulliStream: bit pattern length mismatch");
  }
  double prob = 1.0;
  for (std::size_t j = 0; j < bits.size(); ++j) {
    const double b = bits[j] ? 1.0 : 0.0;
    prob *= b * phi_[j] + (1.0 - b) * (1.0 - phi_[j]);
  }
  return prob;
}

double BernoulliStream::sequence_entropy() const {
  double h = 0.0;
  for (double p : phi_) h += binary_entropy(p);
  return h;
}

double binary_entropy(double p) {
  check_probability(p, "binary_entropy");
  return -xlog2x(p) - xlog2x(1.0 - p);
}

double mi_uncoded_lemma2(const BernoulliStream& stream, std::span<const double> ber) {
  if (ber.size() != stream.length()) {
    throw std::invalid_argument("mi_uncoded_lemma2: one BER per bit required");
  }
  std::vector<double> terms(ber.size());
  for (std::size_t j = 0; j < ber.size(); ++j) {
    check_ber(ber[j], "mi_uncoded_lemma2");
    terms[j] = binary_entropy(stream.phi()[j]) - binary_entropy(ber[j]);
  }
  return numeric::pairwise_sum(terms);
}

double mi_bsc_exact(double phi, double psi) {
  check_probability(phi, "mi_bsc_exact");
  check_ber(psi, "mi_bsc_exact");
  const double out_one = phi * (1.0 - psi) + (1.0 - phi) * psi;
  return binary_entropy(out_one) - binary_entropy(psi);
}

double mi_coded_lemma2(double seq_prob_entropy, double bler) {
  if (!(seq_prob_entropy >= 0.0)) {
    throw std::domain_error("mi_coded_lemma2: negative entropy");
  }
  check_probability(bler, "mi_coded_lemma2");
  return (1.0 - bler) * seq_prob_entropy;
}

double mi_joint(const JointPmf& pmf) {
  const auto px = pmf.row_marginal();
  const auto py = pmf.col_marginal();
  double mi = 0.0;
  for (std::size_t r = 0; r < pmf.rows(); ++r) {
    for (std::size_t c = 0; c < pmf.cols(); ++c) {
      const double p = pmf(r, c);
      if (p > 0.0) mi += p * std::log2(p / (px[r] * py[c]));
    }
  }
  // Rounding can leave a tiny negative residue for independent pairs.
  return mi < 0.0 ? 0.0 : mi;
}

JointPmf compose_joint(std::span<const double> source, const StochasticMatrix& channel) {
  if (source.size() != channel.inputs()) {
    throw std::domain_error("compose_joint: source size does not match channel inputs");
  }
  double total = 0.0;
  for (double p : source) {
    if (!(p >= 0.0)) throw std::domain_error("compose_joint: negative source probability");
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTol) throw std::domain_error("compose_joint: source not normalized");

  std::vector<double> joint(channel.inputs() * channel.outputs());
  for (std::size_t i = 0; i < channel.inputs(); ++i)
    for (std::size_t o = 0; o < channel.outputs(); ++o)
      joint[i * channel.outputs() + o] = source[i] * channel(i, o);
  return JointPmf(channel.inputs(), channel.outputs(), std::move(joint));
}

DpiReport dpi_check(std::span<const double> source, const StochasticMatrix& first,
                    const StochasticMatrix& second) {
  if (first.outputs() != second.inputs()) {
    throw std::domain_error("dpi_check: stage alphabets do not chain");
  }
  if (source.size() > kMaxChainAlphabet) throw std::domain_error("dpi_check: source alphabet > 8");
  // End-to-end channel X -> Z.
  std::vector<double> composed(first.inputs() * second.outputs(), 0.0);
  for (std::size_t x = 0; x < first.inputs(); ++x)
    for (std::size_t y = 0; y < first.outputs(); ++y)
      for (std::size_t z = 0; z < second.outputs(); ++z)
        composed[x * second.outputs() + z] += first(x, y) * second(y, z);
  // Re-normalize rows so accumulated rounding cannot trip the validator.
  for (std::size_t x = 0; x < first.inputs(); ++x) {
    double row = 0.0;
    for (std::size_t z = 0; z < second.outputs(); ++z) row += composed[x * second.outputs() + z];
    for (std::size_t z = 0; z < second.outputs(); ++z) composed[x * second.outputs() + z] /= row;
  }
  const StochasticMatrix xz(first.inputs(), second.outputs(), std::move(composed));

  DpiReport report{};
  report.i_xy = mi_joint(compose_joint(source, first));
  report.i_xz = mi_joint(compose_joint(source, xz));
  report.holds = report.i_xz <= report.i_xy + 1e-10;
  return report;
}

}  // namespace semalloc::info
