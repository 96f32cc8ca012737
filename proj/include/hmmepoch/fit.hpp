#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hmm.hpp"
#include "inference.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace hmmepoch {

/// Published protocol uses 3200 restarts; tests and desk runs use 32.
inline constexpr std::size_t kDefaultRestarts = 3200;
inline constexpr std::size_t kDeskRestarts = 32;

struct FitConfig {
  std::size_t restarts = kDefaultRestarts;
  std::size_t max_iterations = 1000;
  double tolerance = 1e-6;   // stop when absolute log-likelihood gain falls below
  double pseudocount = 1e-6; // added to every expected count in the M-step
  std::uint64_t seed = 0;
  /// Index of the first restart; restart r uses seed ^ (restart_offset + r).
  std::uint64_t restart_offset = 0;
  /// 0 = max(2, largest symbol + 1).
  std::size_t alphabet_size = 0;
  /// Worker threads for restarts (0 = hardware concurrency). Never changes results.
  unsigned threads = 1;
  /// Keep every restart's per-iteration log-likelihood trace.
  bool keep_traces = false;

  void validate() const {
    if (restarts < 1)
      throw InvalidInput("restarts must be at least 1");
    if (!(tolerance > 0.0))
      throw InvalidInput("tolerance must be positive");
    if (!(pseudocount >= 0.0))
      throw InvalidInput("pseudocount must be non-negative");
  }
};

struct FitResult {
  Hmm best_model;
  double best_log_likelihood;
  std::vector<double> restart_log_likelihoods;
  std::size_t iterations_used;
  std::size_t best_restart; // absolute restart index (includes restart_offset)
  std::vector<std::vector<double>> traces; // empty unless keep_traces
};

namespace detail {

/// Row-major working parameters for EM; cheaper to update than Eigen-backed Hmm.
struct EmParams {
  std::size_t n, k;
  std::vector<double> initial, transition, emission;

  Hmm to_hmm() const {
    Vector pi = Eigen::Map<const Vector>(initial.data(), static_cast<Eigen::Index>(n));
    Matrix a = Eigen::Map<const Matrix>(transition.data(), static_cast<Eigen::Index>(n),
                                        static_cast<Eigen::Index>(n));
    Matrix b = Eigen::Map<const Matrix>(emission.data(), static_cast<Eigen::Index>(n),
                                        static_cast<Eigen::Index>(k));
    return Hmm(std::move(pi), std::move(a), std::move(b));
  }
};

inline void random_distribution(Rng &rng, double *out, std::size_t size) {
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    out[i] = rng.uniform_open_zero();
    total += out[i];
  }
  for (std::size_t i = 0; i < size; ++i)
    out[i] /= total;
}

inline EmParams random_params(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  EmParams p{n, k, std::vector<double>(n), std::vector<double>(n * n),
             std::vector<double>(n * k)};
  random_distribution(rng, p.initial.data(), n);
  for (std::size_t i = 0; i < n; ++i)
    random_distribution(rng, p.transition.data() + i * n, n);
  for (std::size_t i = 0; i < n; ++i)
    random_distribution(rng, p.emission.data() + i * k, k);
  return p;
}

/// Expected sufficient statistics from one forward-backward pass.
struct ExpectedCounts {
  std::vector<double> initial, transition, emission;
};

class ForwardBackward {
public:
  ForwardBackward(std::size_t n, std::size_t k, std::size_t length)
      : n_(n), k_(k), alpha_(length * n), scale_(length), beta_(n), beta_next_(n), w_(n) {
    counts_.initial.resize(n);
    counts_.transition.resize(n * n);
    counts_.emission.resize(n * k);
  }

  /// Returns ln P(symbols | params); fills counts(). -inf if impossible.
  double run(const EmParams &p, const std::vector<Symbol> &obs) {
    const std::size_t n = n_, len = obs.size();
    const double *a = p.transition.data();
    const double *b = p.emission.data();

    // forward
    double log_prob = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      double *cur = alpha_.data() + t * n;
      const Symbol o = obs[t];
      if (t == 0) {
        for (std::size_t j = 0; j < n; ++j)
          cur[j] = p.initial[j] * b[j * k_ + o];
      } else {
        const double *prev = cur - n;
        std::fill(cur, cur + n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const double ai = prev[i];
          const double *row = a + i * n;
          for (std::size_t j = 0; j < n; ++j)
            cur[j] += ai * row[j];
        }
        for (std::size_t j = 0; j < n; ++j)
          cur[j] *= b[j * k_ + o];
      }
      double c = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        c += cur[j];
      if (!(c > 0.0))
        return -std::numeric_limits<double>::infinity();
      const double inv = 1.0 / c;
      for (std::size_t j = 0; j < n; ++j)
        cur[j] *= inv;
      scale_[t] = c;
      log_prob += std::log(c);
    }

    // backward, accumulating xi (without the A factor) and gamma on the fly
    std::fill(counts_.transition.begin(), counts_.transition.end(), 0.0);
    std::fill(counts_.emission.begin(), counts_.emission.end(), 0.0);
    std::fill(beta_.begin(), beta_.end(), 1.0);
    for (std::size_t t = len; t-- > 0;) {
      const double *al = alpha_.data() + t * n;
      const Symbol o = obs[t];
      for (std::size_t i = 0; i < n; ++i)
        counts_.emission[i * k_ + o] += al[i] * beta_[i];
      if (t == 0) {
        for (std::size_t i = 0; i < n; ++i)
          counts_.initial[i] = al[i] * beta_[i];
        break;
      }
      // w_j = b_j(o_t) beta_t(j) / c_t ; beta_{t-1}(i) = sum_j a_ij w_j
      const double inv = 1.0 / scale_[t];
      for (std::size_t j = 0; j < n; ++j)
        w_[j] = b[j * k_ + o] * beta_[j] * inv;
      const double *prev = al - n;
      for (std::size_t i = 0; i < n; ++i) {
        const double *row = a + i * n;
        double *acc = counts_.transition.data() + i * n;
        const double pi = prev[i];
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          acc[j] += pi * w_[j];
          s += row[j] * w_[j];
        }
        beta_next_[i] = s;
      }
      std::swap(beta_, beta_next_);
    }
    for (std::size_t i = 0; i < n * n; ++i)
      counts_.transition[i] *= a[i];
    return log_prob;
  }

  const ExpectedCounts &counts() const noexcept { return counts_; }

private:
  std::size_t n_, k_;
  std::vector<double> alpha_, scale_, beta_, beta_next_, w_;
  ExpectedCounts counts_;
};

inline void normalize_into(const double *counts, double pseudocount, double *out,
                           std::size_t size) {
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i)
    total += counts[i] + pseudocount;
  if (!(total > 0.0))
    return; // unvisited row with zero pseudocount: keep previous values
  for (std::size_t i = 0; i < size; ++i)
    out[i] = (counts[i] + pseudocount) / total;
}

inline void m_step(const ExpectedCounts &c, double pseudocount, EmParams &p) {
  normalize_into(c.initial.data(), pseudocount, p.initial.data(), p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    normalize_into(c.transition.data() + i * p.n, pseudocount, p.transition.data() + i * p.n,
                   p.n);
    normalize_into(c.emission.data() + i * p.k, pseudocount, p.emission.data() + i * p.k, p.k);
  }
}

struct RestartOutcome {
  EmParams params;
  double log_likelihood;
  std::size_t iterations;
  std::vector<double> trace;
};

inline RestartOutcome run_restart(const std::vector<Symbol> &obs, std::size_t n, std::size_t k,
                                  const FitConfig &config, std::uint64_t seed) {
  RestartOutcome out{random_params(n, k, seed), 0.0, 0, {}};
  ForwardBackward fb(n, k, obs.size());
  double ll = fb.run(out.params, obs);
  out.trace.push_back(ll);
  EmParams candidate = out.params;
  while (out.iterations < config.max_iterations && std::isfinite(ll)) {
    m_step(fb.counts(), config.pseudocount, candidate);
    const double next = fb.run(candidate, obs);
    ++out.iterations;
    out.trace.push_back(next);
    if (!std::isfinite(next))
      break;
    const double gain = next - ll;
    out.params = candidate;
    ll = next;
    if (gain < config.tolerance)
      break;
  }
  out.log_likelihood = ll;
  return out;
}

inline std::size_t resolve_alphabet(const AnnotatedSequence &seq, const FitConfig &config) {
  return config.alphabet_size ? config.alphabet_size : std::max<std::size_t>(2, seq.min_alphabet());
}

} // namespace detail

/// Multi-restart Baum-Welch. Restarts are independent; the winner is the
/// highest final log-likelihood, ties to the lowest restart index.
inline FitResult baum_welch(const AnnotatedSequence &seq, std::size_t n_states,
                            const FitConfig &config) {
  config.validate();
  if (n_states < 1)
    throw InvalidInput("n_states must be at least 1");
  if (seq.size() < n_states)
    throw InvalidInput("sequence shorter than the number of states");
  const std::size_t k = detail::resolve_alphabet(seq, config);
  seq.validate_against(k);

  std::vector<std::optional<detail::RestartOutcome>> outcomes(config.restarts);
  parallel_for(config.restarts, config.threads, [&](std::size_t r) {
    outcomes[r] = detail::run_restart(seq.symbols, n_states, k, config,
                                      derive_seed(config.seed, config.restart_offset + r));
  });

  std::size_t best = 0;
  std::vector<double> lls(config.restarts);
  for (std::size_t r = 0; r < config.restarts; ++r) {
    lls[r] = outcomes[r]->log_likelihood;
    if (lls[r] > lls[best])
      best = r;
  }
  if (!std::isfinite(lls[best]))
    throw FitError(ErrorCategory::numerical,
                   "every restart reached a zero-probability model", n_states);

  FitResult result{outcomes[best]->params.to_hmm(),
                   lls[best],
                   std::move(lls),
                   outcomes[best]->iterations,
                   static_cast<std::size_t>(config.restart_offset + best),
                   {}};
  if (config.keep_traces)
    for (auto &o : outcomes)
      result.traces.push_back(std::move(o->trace));
  return result;
}

/// Combines two fits over disjoint restart ranges, `first` covering the lower indices.
inline FitResult merge_fits(FitResult first, FitResult second) {
  const bool take_second = second.best_log_likelihood > first.best_log_likelihood;
  FitResult merged = take_second ? std::move(second) : first;
  std::vector<double> all = first.restart_log_likelihoods;
  const auto &tail = take_second ? merged.restart_log_likelihoods : second.restart_log_likelihoods;
  all.insert(all.end(), tail.begin(), tail.end());
  merged.restart_log_likelihoods = std::move(all);
  return merged;
}

struct InformationCriteria {
  double aic;
  double bic;
};

inline std::size_t parameter_count(std::size_t n_states, std::size_t alphabet_size) {
  return n_states * (n_states - 1) + n_states * (alphabet_size - 1) + (n_states - 1);
}

inline InformationCriteria information_criteria(double log_likelihood, std::size_t n_states,
                                                std::size_t alphabet_size,
                                                std::size_t sequence_length) {
  if (sequence_length < 1)
    throw InvalidInput("sequence length must be at least 1");
  const double params = static_cast<double>(parameter_count(n_states, alphabet_size));
  return {2.0 * params - 2.0 * log_likelihood,
          params * std::log(static_cast<double>(sequence_length)) - 2.0 * log_likelihood};
}

enum class Criterion { aic, bic };

struct SelectionRow {
  std::size_t n_states;
  double log_likelihood;
  std::size_t parameter_count;
  double aic;
  double bic;
};

struct SelectionReport {
  std::vector<SelectionRow> rows;
  std::size_t chosen_n_states_aic;
  std::size_t chosen_n_states_bic;
  std::vector<Hmm> models; // best model per row

  std::size_t chosen(Criterion c) const {
    return c == Criterion::aic ? chosen_n_states_aic : chosen_n_states_bic;
  }
  const Hmm &model_for(std::size_t n_states) const {
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].n_states == n_states)
        return models[i];
    throw InvalidInput("no fitted model with " + std::to_string(n_states) + " states");
  }
};

struct StateRange {
  std::size_t lo;
  std::size_t hi; // inclusive
};

/// Fits every n in the range and tabulates AIC/BIC. Each n gets its own
/// derived seed; smaller n wins ties.
inline SelectionReport select_states(const AnnotatedSequence &seq, StateRange range,
                                     const FitConfig &config) {
  if (range.lo < 1 || range.hi < range.lo)
    throw InvalidInput("state range is empty");
  const std::size_t k = detail::resolve_alphabet(seq, config);
  SelectionReport report{{}, 0, 0, {}};
  for (std::size_t n = range.lo; n <= range.hi; ++n) {
    FitConfig cfg = config;
    cfg.seed = mix_seed(config.seed, n);
    cfg.alphabet_size = k;
    try {
      FitResult fit = baum_welch(seq, n, cfg);
      const auto ic = information_criteria(fit.best_log_likelihood, n, k, seq.size());
      report.rows.push_back({n, fit.best_log_likelihood, parameter_count(n, k), ic.aic, ic.bic});
      report.models.push_back(std::move(fit.best_model));
    } catch (const FitError &) {
      throw;
    } catch (const Error &e) {
      throw FitError(e.category(), "fitting " + std::to_string(n) + " states: " + e.what(), n);
    }
  }
  auto argmin = [&](auto member) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < report.rows.size(); ++i)
      if (report.rows[i].*member < report.rows[best].*member)
        best = i;
    return report.rows[best].n_states;
  };
  report.chosen_n_states_aic = argmin(&SelectionRow::aic);
  report.chosen_n_states_bic = argmin(&SelectionRow::bic);
  return report;
}

struct RecoveryTable {
  StateRange range;
  std::vector<std::size_t> aic_choices; // one per trial
  std::vector<std::size_t> bic_choices;

  std::size_t trials() const noexcept { return aic_choices.size(); }

  double frequency(Criterion c, std::size_t n) const {
    const auto &v = c == Criterion::aic ? aic_choices : bic_choices;
    if (v.empty())
      return 0.0;
    return static_cast<double>(std::count(v.begin(), v.end(), n)) / static_cast<double>(v.size());
  }

  /// Most frequent choice; ties to the smaller n.
  std::size_t mode(Criterion c) const {
    std::size_t best = range.lo;
    for (std::size_t n = range.lo; n <= range.hi; ++n)
      if (frequency(c, n) > frequency(c, best))
        best = n;
    return best;
  }
};

/// Fit-and-select on fresh sequences drawn from a known model.
inline RecoveryTable recovery_experiment(const Hmm &truth, std::size_t n_trials,
                                         StateRange range, const FitConfig &config,
                                         std::size_t length = 10731) {
  if (n_trials < 1)
    throw InvalidInput("need at least one trial");
  RecoveryTable table{range, {}, {}};
  FitConfig cfg = config;
  cfg.alphabet_size = truth.alphabet_size();
  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    const auto data = generate(truth, length, mix_seed(config.seed, 2 * trial));
    cfg.seed = mix_seed(config.seed, 2 * trial + 1);
    const auto report = select_states(data.sequence, range, cfg);
    table.aic_choices.push_back(report.chosen_n_states_aic);
    table.bic_choices.push_back(report.chosen_n_states_bic);
  }
  return table;
}

} // namespace hmmepoch
