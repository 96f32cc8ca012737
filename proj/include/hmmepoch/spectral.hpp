#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include "hmm.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace hmmepoch {

enum class Subspace { one, two };

inline constexpr double kComplexTolerance = 1e-8;
inline constexpr double kZeroEntryTolerance = 1e-10;

struct SpectralSummary {
  std::vector<std::complex<double>> eigenvalues; // descending modulus
  double lambda2 = 0.0;                          // modulus when complex
  double relaxation_time = 1.0;                  // 1 / (1 - lambda2)
  std::optional<double> decay_time;              // -1 / ln(lambda2), when 0 < lambda2 < 1
  Vector stationary;
  Vector second_vector; // unit max-abs entry, first nonzero entry positive
  std::vector<Subspace> subspace_labels; // empty when no split exists
  bool lambda2_is_real = true;
  double lambda2_imag_magnitude = 0.0;
};

namespace detail {

inline bool eigen_order(const std::complex<double> &a, const std::complex<double> &b) {
  const double ma = std::abs(a), mb = std::abs(b);
  if (ma != mb)
    return ma > mb;
  if (a.real() != b.real())
    return a.real() > b.real();
  return a.imag() > b.imag();
}

inline void check_row_stochastic(const Matrix &p) {
  if (p.rows() != p.cols() || p.rows() < 1)
    throw InvalidInput("transition matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    check_distribution(p.row(i).data(), p.cols(), "transition row " + std::to_string(i));
}

inline double tau_from_gap(double gap) {
  if (gap <= 1e-14)
    return std::numeric_limits<double>::infinity();
  return 1.0 / gap;
}

inline double tau_from_lambda(double lambda2) { return tau_from_gap(1.0 - lambda2); }

/// Spectral gap 1 - lambda2 from a shifted eigenvalue mu = lambda - 1. Working
/// with P - I keeps the gap accurate when lambda2 is close to 1.
inline double gap_from_shifted(const std::complex<double> &mu) {
  if (std::abs(mu.imag()) > kComplexTolerance)
    return 1.0 - std::abs(mu + 1.0);
  return -mu.real();
}

inline bool shifted_order(const std::complex<double> &a, const std::complex<double> &b) {
  return eigen_order(a + 1.0, b + 1.0);
}

/// Eigenvalues of P^T - I, ordered by the modulus of the matching eigenvalue of P.
inline std::vector<std::complex<double>> sorted_shifted_eigenvalues(const Matrix &p) {
  Eigen::MatrixXd m = p.transpose() - Eigen::MatrixXd::Identity(p.rows(), p.cols());
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  if (solver.info() != Eigen::Success)
    throw DomainError("eigenvalue iteration did not converge");
  std::vector<std::complex<double>> values(solver.eigenvalues().begin(),
                                           solver.eigenvalues().end());
  std::sort(values.begin(), values.end(), shifted_order);
  return values;
}

inline Vector stationary_distribution(const Matrix &p) {
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd system = p.transpose() - Eigen::MatrixXd::Identity(n, n);
  system.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  Vector pi;
  if (lu.isInvertible()) {
    pi = lu.solve(rhs);
  } else {
    // reducible chain: any Perron vector is stationary
    Eigen::EigenSolver<Eigen::MatrixXd> solver(p.transpose());
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(solver.eigenvalues()(i) - 1.0) < std::abs(solver.eigenvalues()(best) - 1.0))
        best = i;
    pi = solver.eigenvectors().col(best).real().cwiseAbs();
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (pi(i) < 0.0)
      pi(i) = 0.0;
  pi /= pi.sum();
  return pi;
}

} // namespace detail

/// Relaxation time of a row-stochastic matrix, from eigenvalues only.
inline double relaxation_time(const Matrix &transition) {
  if (transition.rows() == 1)
    return 1.0;
  const auto values = detail::sorted_shifted_eigenvalues(transition);
  return detail::tau_from_gap(detail::gap_from_shifted(values[1]));
}

inline double decay_time(double lambda2) {
  if (!(lambda2 > 0.0 && lambda2 < 1.0))
    throw DomainError("decay time needs 0 < lambda2 < 1, got " + std::to_string(lambda2));
  return -1.0 / std::log(lambda2);
}

namespace detail {

inline std::vector<Subspace> sign_split(const Vector &v) {
  std::vector<Subspace> labels(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    labels[static_cast<std::size_t>(i)] = v(i) < -kZeroEntryTolerance ? Subspace::two : Subspace::one;
  return labels;
}

inline bool has_both(const std::vector<Subspace> &labels) {
  return std::find(labels.begin(), labels.end(), Subspace::one) != labels.end() &&
         std::find(labels.begin(), labels.end(), Subspace::two) != labels.end();
}

} // namespace detail

inline SpectralSummary spectral_summary(const Matrix &transition) {
  detail::check_row_stochastic(transition);
  const Eigen::Index n = transition.rows();
  SpectralSummary s;
  s.stationary = detail::stationary_distribution(transition);
  if (n == 1) {
    s.eigenvalues = {1.0};
    s.lambda2 = 0.0;
    s.relaxation_time = 1.0;
    s.second_vector = Vector::Zero(1);
    return s;
  }

  // Left eigenvectors: the chain evolves row distributions, v(t+1) = v(t) P.
  // The shift by I leaves eigenvectors unchanged and sharpens the gap.
  Eigen::MatrixXd shifted = transition.transpose() - Eigen::MatrixXd::Identity(n, n);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(shifted);
  if (solver.info() != Eigen::Success)
    throw DomainError("eigen-decomposition did not converge");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    order[static_cast<std::size_t>(i)] = i;
  const auto &vals = solver.eigenvalues();
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return detail::shifted_order(vals(a), vals(b)); });
  for (auto i : order)
    s.eigenvalues.push_back(vals(i) + 1.0);

  const std::complex<double> mu2 = vals(order[1]);
  s.lambda2_imag_magnitude = std::abs(mu2.imag());
  s.lambda2_is_real = s.lambda2_imag_magnitude <= kComplexTolerance;
  const double gap = detail::gap_from_shifted(mu2);
  s.lambda2 = 1.0 - gap;
  s.relaxation_time = detail::tau_from_gap(gap);
  if (gap > 0.0 && gap < 1.0)
    s.decay_time = -1.0 / std::log1p(-gap);

  Vector v2 = solver.eigenvectors().col(order[1]).real();
  const double scale = v2.cwiseAbs().maxCoeff();
  if (scale > 0.0)
    v2 /= scale;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(v2(i)) > kZeroEntryTolerance) {
      if (v2(i) < 0.0)
        v2 = -v2;
      break;
    }
  }
  s.second_vector = v2;
  if (s.lambda2_is_real) {
    auto labels = detail::sign_split(v2);
    if (detail::has_both(labels))
      s.subspace_labels = std::move(labels);
  }
  return s;
}

inline SpectralSummary spectral_summary(const Hmm &hmm) { return spectral_summary(hmm.transition()); }

/// Per-state subspace candidates from the signs of the second eigenvector.
inline std::vector<Subspace> subspace_split(const SpectralSummary &summary) {
  if (!summary.lambda2_is_real)
    throw DomainError("second eigenvalue is complex (imaginary part " +
                      std::to_string(summary.lambda2_imag_magnitude) +
                      "); no real sign split exists");
  if (summary.second_vector.size() < 2)
    throw DegenerateSplit("a single-state machine has no second eigenvector");
  auto labels = detail::sign_split(summary.second_vector);
  if (!detail::has_both(labels))
    throw DegenerateSplit("second eigenvector entries all share one sign");
  return labels;
}

struct MixingBounds {
  double epsilon;
  double pi_min;
  double lower; // (tau - 1) ln(1 / 2 eps)
  double upper; // tau ln(1 / (eps pi_min))
};

inline MixingBounds mixing_bounds(double relaxation_time, double pi_min, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw DomainError("epsilon must lie in (0, 1/2)");
  if (!(pi_min > 0.0))
    throw DomainError("stationary distribution has a zero entry; refit with a positive "
                      "pseudocount so every state is reachable");
  return {epsilon, pi_min, (relaxation_time - 1.0) * std::log(1.0 / (2.0 * epsilon)),
          relaxation_time * std::log(1.0 / (epsilon * pi_min))};
}

inline MixingBounds mixing_bounds(const SpectralSummary &summary, double epsilon) {
  return mixing_bounds(summary.relaxation_time, summary.stationary.minCoeff(), epsilon);
}

struct NullTauReport {
  double observed_tau;
  std::vector<double> null_taus;
  double p_value;              // fraction of replicates with null tau >= observed
  double ratio_to_null_median; // observed / median(null)
};

/// Row-shuffle null: permute entries within each transition row, keeping every
/// state's list of outgoing probabilities.
inline NullTauReport null_tau(const Hmm &hmm, std::size_t replicates, std::uint64_t seed,
                              unsigned threads = 1) {
  if (replicates < 1)
    throw InvalidInput("replicates must be at least 1");
  NullTauReport report{relaxation_time(hmm.transition()), std::vector<double>(replicates), 0.0,
                       0.0};
  const Eigen::Index n = hmm.transition().rows();
  parallel_for(replicates, threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    Matrix shuffled = hmm.transition();
    for (Eigen::Index i = 0; i < n; ++i)
      rng.shuffle(std::span<double>(shuffled.row(i).data(), static_cast<std::size_t>(n)));
    report.null_taus[r] = relaxation_time(shuffled);
  });

  std::size_t at_least = 0;
  for (double t : report.null_taus)
    if (t >= report.observed_tau)
      ++at_least;
  report.p_value = static_cast<double>(at_least) / static_cast<double>(replicates);

  std::vector<double> sorted = report.null_taus;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  report.ratio_to_null_median = report.observed_tau / median;
  return report;
}

} // namespace hmmepoch
