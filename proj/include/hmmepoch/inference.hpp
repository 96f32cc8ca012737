#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "hmm.hpp"
#include "random.hpp"

namespace hmmepoch {

namespace detail {

inline void check_decodable(const Hmm &hmm, const AnnotatedSequence &seq) {
  if (seq.empty())
    throw InvalidInput("sequence is empty");
  seq.validate_against(hmm.alphabet_size());
}

inline double safe_log(double x) {
  return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

} // namespace detail

/// Natural-log marginal probability of the symbols, summed over hidden paths
/// (scaled forward recursion). Returns -inf for an impossible sequence.
inline double log_likelihood(const Hmm &hmm, const AnnotatedSequence &seq) {
  detail::check_decodable(hmm, seq);
  const std::size_t n = hmm.n_states();
  const Matrix &a = hmm.transition();
  const Matrix &b = hmm.emission();

  std::vector<double> alpha(n), next(n);
  double log_prob = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const Symbol o = seq.symbols[t];
    if (t == 0) {
      for (std::size_t j = 0; j < n; ++j)
        next[j] = hmm.initial()[j] * b(j, o);
    } else {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double ai = alpha[i];
        if (ai == 0.0)
          continue;
        const double *row = a.row(i).data();
        for (std::size_t j = 0; j < n; ++j)
          next[j] += ai * row[j];
      }
      for (std::size_t j = 0; j < n; ++j)
        next[j] *= b(j, o);
    }
    double scale = 0.0;
    for (double v : next)
      scale += v;
    if (!(scale > 0.0))
      return -std::numeric_limits<double>::infinity();
    log_prob += std::log(scale);
    for (std::size_t j = 0; j < n; ++j)
      alpha[j] = next[j] / scale;
  }
  return log_prob;
}

/// Most probable hidden path. Ties go to the lowest state index, both for the
/// final state and for every back-pointer.
inline StatePath viterbi(const Hmm &hmm, const AnnotatedSequence &seq) {
  detail::check_decodable(hmm, seq);
  const std::size_t n = hmm.n_states();
  const std::size_t len = seq.size();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  Matrix log_a = hmm.transition().unaryExpr([](double x) { return detail::safe_log(x); });
  Matrix log_b = hmm.emission().unaryExpr([](double x) { return detail::safe_log(x); });

  std::vector<double> score(n), next(n);
  std::vector<StateIndex> back(len * n, 0);

  auto fail_if_dead = [&](const std::vector<double> &s, std::size_t t) {
    for (double v : s)
      if (v > kNegInf)
        return;
    throw DecodeFailure("no admissible state path: sequence impossible at position " +
                            std::to_string(t),
                        t);
  };

  for (std::size_t j = 0; j < n; ++j)
    score[j] = detail::safe_log(hmm.initial()[j]) + log_b(j, seq.symbols[0]);
  fail_if_dead(score, 0);

  for (std::size_t t = 1; t < len; ++t) {
    const Symbol o = seq.symbols[t];
    StateIndex *bp = back.data() + t * n;
    for (std::size_t j = 0; j < n; ++j) {
      double best = kNegInf;
      StateIndex arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double cand = score[i] + log_a(i, j);
        if (cand > best) {
          best = cand;
          arg = static_cast<StateIndex>(i);
        }
      }
      next[j] = best + log_b(j, o);
      bp[j] = arg;
    }
    std::swap(score, next);
    fail_if_dead(score, t);
  }

  StatePath path;
  path.states.resize(len);
  StateIndex last = 0;
  double best = kNegInf;
  for (std::size_t j = 0; j < n; ++j)
    if (score[j] > best) {
      best = score[j];
      last = static_cast<StateIndex>(j);
    }
  path.log_likelihood = best;
  path.states[len - 1] = last;
  for (std::size_t t = len - 1; t > 0; --t)
    path.states[t - 1] = back[t * n + path.states[t]];
  return path;
}

/// ln P(path, symbols) for an explicit path.
inline double path_log_probability(const Hmm &hmm, const AnnotatedSequence &seq,
                                   const std::vector<StateIndex> &states) {
  detail::check_decodable(hmm, seq);
  if (states.size() != seq.size())
    throw InvalidInput("path length differs from sequence length");
  double lp = detail::safe_log(hmm.initial()[states[0]]);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (states[t] >= hmm.n_states())
      throw InvalidInput("path state index out of range");
    lp += detail::safe_log(hmm.emission()(states[t], seq.symbols[t]));
    if (t + 1 < seq.size())
      lp += detail::safe_log(hmm.transition()(states[t], states[t + 1]));
  }
  return lp;
}

struct Generated {
  AnnotatedSequence sequence;
  StatePath path;
};

/// Samples `length` steps: initial state, then emit / transition alternately.
inline Generated generate(const Hmm &hmm, std::size_t length, std::uint64_t seed) {
  if (length < 1)
    throw InvalidInput("generated length must be at least 1");
  Rng rng(seed);
  const std::size_t n = hmm.n_states();
  const std::size_t k = hmm.alphabet_size();

  Generated out;
  out.sequence.symbols.resize(length);
  out.path.states.resize(length);

  std::size_t state = rng.categorical({hmm.initial().data(), n});
  for (std::size_t t = 0; t < length; ++t) {
    out.path.states[t] = static_cast<StateIndex>(state);
    out.sequence.symbols[t] =
        static_cast<Symbol>(rng.categorical({hmm.emission().row(state).data(), k}));
    if (t + 1 < length)
      state = rng.categorical({hmm.transition().row(state).data(), n});
  }
  out.path.log_likelihood = path_log_probability(hmm, out.sequence, out.path.states);
  return out;
}

} // namespace hmmepoch
