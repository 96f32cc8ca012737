#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace hmmepoch {

using Symbol = std::uint32_t;
using StateIndex = std::uint32_t;

/// Symbol codes for the binary edit alphabet.
inline constexpr Symbol kNonRevert = 0; // "C"
inline constexpr Symbol kRevert = 1;    // "R"

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kStochasticTolerance = 1e-9;

namespace detail {

inline void check_distribution(const double *p, Eigen::Index size, const std::string &what) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < size; ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0 + kStochasticTolerance))
      throw InvalidInput(what + " has an entry outside [0,1]");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > kStochasticTolerance)
    throw InvalidInput(what + " sums to " + std::to_string(sum) + ", not 1");
}

} // namespace detail

/// Discrete-emission hidden Markov model. Immutable once constructed; the
/// constructor enforces stochasticity of every row.
class Hmm {
public:
  Hmm(Vector initial, Matrix transition, Matrix emission)
      : initial_(std::move(initial)), transition_(std::move(transition)),
        emission_(std::move(emission)) {
    const auto n = transition_.rows();
    if (n < 1)
      throw InvalidInput("model needs at least one state");
    if (transition_.cols() != n)
      throw InvalidInput("transition matrix is not square");
    if (initial_.size() != n)
      throw InvalidInput("initial distribution length differs from state count");
    if (emission_.rows() != n)
      throw InvalidInput("emission matrix row count differs from state count");
    if (emission_.cols() < 1)
      throw InvalidInput("alphabet must have at least one symbol");
    detail::check_distribution(initial_.data(), n, "initial distribution");
    for (Eigen::Index i = 0; i < n; ++i) {
      detail::check_distribution(transition_.row(i).data(), n,
                                 "transition row " + std::to_string(i));
      detail::check_distribution(emission_.row(i).data(), emission_.cols(),
                                 "emission row " + std::to_string(i));
    }
  }

  std::size_t n_states() const noexcept { return static_cast<std::size_t>(transition_.rows()); }
  std::size_t alphabet_size() const noexcept { return static_cast<std::size_t>(emission_.cols()); }

  const Vector &initial() const noexcept { return initial_; }
  const Matrix &transition() const noexcept { return transition_; }
  const Matrix &emission() const noexcept { return emission_; }

  /// Free parameters: n(n-1) transition + n(k-1) emission + (n-1) initial.
  std::size_t parameter_count() const noexcept {
    const auto n = n_states(), k = alphabet_size();
    return n * (n - 1) + n * (k - 1) + (n - 1);
  }

  friend bool operator==(const Hmm &a, const Hmm &b) {
    return a.initial_ == b.initial_ && a.transition_ == b.transition_ &&
           a.emission_ == b.emission_;
  }

private:
  Vector initial_;
  Matrix transition_;
  Matrix emission_;
};

/// Symbol stream with optional per-step annotations.
struct AnnotatedSequence {
  std::vector<Symbol> symbols;
  std::optional<std::vector<std::int64_t>> timestamps; // epoch seconds
  std::optional<std::vector<std::string>> user_ids;
  std::optional<std::vector<std::string>> user_flags;

  AnnotatedSequence() = default;
  explicit AnnotatedSequence(std::vector<Symbol> s) : symbols(std::move(s)) {}

  std::size_t size() const noexcept { return symbols.size(); }
  bool empty() const noexcept { return symbols.empty(); }

  /// Smallest alphabet that covers every symbol.
  std::size_t min_alphabet() const noexcept {
    Symbol top = 0;
    for (auto s : symbols)
      top = std::max(top, s);
    return symbols.empty() ? 1 : static_cast<std::size_t>(top) + 1;
  }

  void validate() const {
    const auto n = symbols.size();
    if (timestamps) {
      if (timestamps->size() != n)
        throw InvalidInput("timestamps length differs from symbol count");
      for (std::size_t i = 1; i < n; ++i)
        if ((*timestamps)[i] < (*timestamps)[i - 1])
          throw InvalidInput("timestamps decrease at position " + std::to_string(i));
    }
    if (user_ids && user_ids->size() != n)
      throw InvalidInput("user id list length differs from symbol count");
    if (user_flags && user_flags->size() != n)
      throw InvalidInput("user flag list length differs from symbol count");
  }

  void validate_against(std::size_t alphabet_size) const {
    validate();
    for (std::size_t t = 0; t < symbols.size(); ++t)
      if (symbols[t] >= alphabet_size)
        throw InvalidInput("symbol " + std::to_string(symbols[t]) + " at position " +
                           std::to_string(t) + " outside alphabet of size " +
                           std::to_string(alphabet_size));
  }
};

/// Parses "CRRC"-style strings (C = non-revert, R = revert).
inline AnnotatedSequence from_cr_string(std::string_view text) {
  AnnotatedSequence seq;
  seq.symbols.reserve(text.size());
  for (char c : text) {
    if (c == 'C')
      seq.symbols.push_back(kNonRevert);
    else if (c == 'R')
      seq.symbols.push_back(kRevert);
    else
      throw InvalidInput(std::string("unexpected character '") + c + "' in C/R string");
  }
  return seq;
}

inline std::string to_cr_string(const std::vector<Symbol> &symbols) {
  std::string out;
  out.reserve(symbols.size());
  for (auto s : symbols) {
    if (s > kRevert)
      throw InvalidInput("symbol outside the binary C/R alphabet");
    out.push_back(s == kRevert ? 'R' : 'C');
  }
  return out;
}

struct StatePath {
  std::vector<StateIndex> states;
  double log_likelihood = 0.0; // ln P(path, symbols)
};

} // namespace hmmepoch
