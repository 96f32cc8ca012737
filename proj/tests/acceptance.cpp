// Acceptance gate. `acceptance N` runs criterion N; no argument runs all.
// Each criterion prints one PASS/FAIL line; the exit status is nonzero if any
// criterion fails.

#include <hmmepoch.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>

#include "oracles.hpp"

using namespace hmmepoch;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. exact inference against path enumeration
Outcome exact_inference() {
  std::mt19937_64 gen(101);
  double worst_ll = 0.0, worst_vit = 0.0;
  std::size_t sequences = 0, path_mismatch = 0, zero_cases = 0, bad_zero = 0;
  for (int m = 0; m < 50; ++m) {
    const std::size_t n = 1 + static_cast<std::size_t>(m % 3);
    const double zero_chance = m % 5 == 4 ? 0.3 : 0.0;
    const auto hmm = oracle::random_hmm(n, 2, gen, zero_chance);
    for (std::size_t len = 1; len <= 8; ++len)
      for (const auto &obs : oracle::all_sequences(2, len)) {
        ++sequences;
        const AnnotatedSequence seq(obs);
        const auto e = oracle::enumerate_paths(hmm, obs);
        const double ll = log_likelihood(hmm, seq);
        if (e.likelihood == 0.0) {
          ++zero_cases;
          bool threw = false;
          try {
            viterbi(hmm, seq);
          } catch (const DecodeFailure &) {
            threw = true;
          }
          if (!std::isinf(ll) || ll > 0 || !threw)
            ++bad_zero;
          continue;
        }
        worst_ll = std::max(worst_ll, std::abs(ll - std::log(e.likelihood)));
        const auto path = viterbi(hmm, seq);
        worst_vit = std::max(worst_vit, std::abs(path.log_likelihood - std::log(e.best)));
        worst_vit = std::max(worst_vit, std::abs(path_log_probability(hmm, seq, path.states) -
                                                 std::log(e.best)));
        if (e.runner_up < e.best * (1.0 - 1e-9) && path.states != e.best_path)
          ++path_mismatch;
      }
  }
  const bool pass = worst_ll <= 1e-9 && worst_vit <= 1e-9 && path_mismatch == 0 && bad_zero == 0;
  return {pass, fmt("%zu sequences, max |dlogL| %.2e, max |dViterbi| %.2e, path mismatches %zu, "
                    "zero-probability cases %zu (%zu mishandled)",
                    sequences, worst_ll, worst_vit, path_mismatch, zero_cases, bad_zero)};
}

// 2. two-state closed forms
Outcome spectral_closed_forms() {
  double worst_lambda = 0.0, worst_tau = 0.0, worst_decay = 0.0;
  for (double p : {0.5, 0.1, 0.01, 0.001}) {
    const auto s = spectral_summary(symmetric_two_state(p));
    worst_lambda = std::max(worst_lambda, std::abs(s.lambda2 - (1.0 - 2.0 * p)));
    worst_tau = std::max(worst_tau, std::abs(s.relaxation_time - 1.0 / (2.0 * p)));
  }
  std::size_t decay_checked = 0;
  for (double p : {0.005, 0.004, 0.0025, 0.001, 0.0005, 0.0001}) {
    const auto s = spectral_summary(symmetric_two_state(p));
    if (s.lambda2 < 0.99 || !s.decay_time)
      continue;
    ++decay_checked;
    worst_decay = std::max(worst_decay, std::abs(*s.decay_time - (s.relaxation_time - 0.5)));
  }
  const bool pass = worst_lambda <= 1e-10 && worst_tau <= 1e-10 && worst_decay <= 0.01 && decay_checked == 6;
  return {pass, fmt("max |dlambda2| %.2e, max |dtau| %.2e, max |tau_d - (tau - 1/2)| %.2e over %zu chains",
                    worst_lambda, worst_tau, worst_decay, decay_checked)};
}

// 3. state-count recovery on the planted eight-state machine
Outcome state_count_recovery() {
  FitConfig cfg;
  cfg.restarts = kDeskRestarts;
  cfg.seed = 2024;
  cfg.threads = 0;
  const auto table = recovery_experiment(planted_eight_state(1e-3), 24, {1, 10}, cfg, 10731);
  const auto aic_mode = table.mode(Criterion::aic), bic_mode = table.mode(Criterion::bic);
  const double at8 = table.frequency(Criterion::aic, 8);
  std::string choices = "AIC";
  for (auto c : table.aic_choices)
    choices += " " + std::to_string(c);
  choices += " | BIC";
  for (auto c : table.bic_choices)
    choices += " " + std::to_string(c);
  const bool pass = aic_mode >= 7 && aic_mode <= 9 && at8 >= 0.25 && bic_mode < aic_mode;
  return {pass, fmt("AIC mode %zu (n=8 in %.1f%% of trials), BIC mode %zu, BIC at n=8 %.1f%%; ", aic_mode,
                    100 * at8, bic_mode, 100 * table.frequency(Criterion::bic, 8)) +
                    choices};
}

// 4. observed relaxation time against row-shuffled nulls
Outcome null_separation() {
  const auto rep = null_tau(planted_eight_state(1e-3), 1000, 4, 0);
  const bool pass = rep.ratio_to_null_median >= 5.0 && rep.p_value <= 0.01;
  return {pass, fmt("observed tau %.1f, %.1fx null median, p = %.4f", rep.observed_tau,
                    rep.ratio_to_null_median, rep.p_value)};
}

// 5. epoch recovery on long planted sequences
Outcome epoch_recovery() {
  const auto hmm = planted_eight_state(1e-3);
  const auto summary = spectral_summary(hmm);
  const auto split = subspace_split(summary);
  double worst = 0.0, run_steps = 0.0, runs = 0.0;
  std::size_t outside = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = generate(hmm, 100000, mix_seed(5, s));
    const auto seg = segment(hmm, summary, g.sequence);
    std::vector<Subspace> raw(g.path.states.size());
    for (std::size_t t = 0; t < raw.size(); ++t)
      raw[t] = split[g.path.states[t]];
    const auto truth = segment_labels(raw, g.sequence.symbols);
    const double rel = std::abs(static_cast<double>(seg.transitions.size()) -
                                static_cast<double>(truth.transitions.size())) /
                       static_cast<double>(truth.transitions.size());
    worst = std::max(worst, rel);
    outside += rel > 0.2;
    for (const auto &r : seg.runs) {
      run_steps += static_cast<double>(r.length);
      runs += 1.0;
    }
  }
  const double tau = summary.relaxation_time, pooled = run_steps / runs;
  const double factor = std::max(pooled / tau, tau / pooled);
  const bool pass = outside == 0 && factor <= 3.0;
  return {pass, fmt("worst transition-count error %.1f%% (%zu of 20 outside 20%%), pooled trapping time "
                    "%.1f vs tau %.1f (factor %.2f)",
                    100 * worst, outside, pooled, tau, factor)};
}

// 6. motif signature and identical-statistics control
Outcome motif_signature() {
  std::mt19937_64 gen(6);
  std::vector<Conflict> labels;
  std::vector<Symbol> symbols;
  // high epochs switch symbol with probability 0.8, low epochs with 0.1
  for (int epoch = 0; epoch < 40; ++epoch) {
    const bool high = epoch % 2 == 0;
    std::bernoulli_distribution flip(high ? 0.8 : 0.1);
    Symbol s = static_cast<Symbol>(gen() & 1);
    for (int i = 0; i < 400; ++i) {
      if (flip(gen))
        s = 1 - s;
      labels.push_back(high ? Conflict::high : Conflict::low);
      symbols.push_back(s);
    }
  }
  const std::size_t lengths[] = {2};
  const AnnotatedSequence seq(symbols);
  const auto t = motif_table(segmentation_from_labels(labels), seq, lengths).front();
  auto is = [](const std::string &p, const char *a, const char *b) { return p == a || p == b; };
  const bool signature = is(t.top_high(0).pattern, "CR", "RC") && is(t.top_high(1).pattern, "CR", "RC") &&
                         is(t.top_low(0).pattern, "CC", "RR") && is(t.top_low(1).pattern, "CC", "RR");

  // control: both epoch types hold the same content
  std::vector<Conflict> same_labels;
  std::vector<Symbol> same_symbols;
  std::vector<Symbol> block;
  for (int i = 0; i < 400; ++i)
    block.push_back(static_cast<Symbol>(gen() & 1));
  for (int epoch = 0; epoch < 20; ++epoch) {
    same_labels.insert(same_labels.end(), block.size(), epoch % 2 ? Conflict::low : Conflict::high);
    same_symbols.insert(same_symbols.end(), block.begin(), block.end());
  }
  const std::size_t all_lengths[] = {2, 3, 4, 5};
  double worst_ratio = 0.0;
  for (const auto &c : motif_table(segmentation_from_labels(same_labels), AnnotatedSequence(same_symbols),
                                   all_lengths))
    for (const auto &row : c.rows)
      worst_ratio = std::max({worst_ratio, std::abs(row.partial_kl_high) / c.smoothing_floor,
                              std::abs(row.partial_kl_low) / c.smoothing_floor});
  const bool pass = signature && worst_ratio <= 10.0;
  return {pass, fmt("high top-2 %s,%s; low top-2 %s,%s; control max |partial KL| = %.3g x floor",
                    t.top_high(0).pattern.c_str(), t.top_high(1).pattern.c_str(),
                    t.top_low(0).pattern.c_str(), t.top_low(1).pattern.c_str(), worst_ratio)};
}

std::vector<Transition> random_transitions(std::size_t count, std::size_t n_steps, std::mt19937_64 &gen) {
  std::vector<std::size_t> steps;
  std::uniform_int_distribution<std::size_t> u(1, n_steps - 1);
  while (steps.size() < count) {
    const auto s = u(gen);
    if (std::find(steps.begin(), steps.end(), s) == steps.end())
      steps.push_back(s);
  }
  std::sort(steps.begin(), steps.end());
  std::vector<Transition> out;
  for (std::size_t i = 0; i < steps.size(); ++i)
    out.push_back({steps[i], i % 2 ? Direction::to_high : Direction::to_low});
  return out;
}

// 7. association harness and null calibration
Outcome association_calibration() {
  std::mt19937_64 gen(7);
  const std::size_t n_steps = 1270000, n_events = 1545, n_transitions = 1387, window = 10;
  const auto transitions = random_transitions(n_transitions, n_steps, gen);

  // a planted share f sits next to a transition, the rest is uniform, so that
  // f + (1 - f) * coverage = 8.8%
  std::vector<char> covered(n_steps, 0);
  for (const auto &t : transitions)
    for (std::size_t s = t.step >= window ? t.step - window : 0; s <= std::min(n_steps - 1, t.step + window); ++s)
      covered[s] = 1;
  const double coverage =
      static_cast<double>(std::count(covered.begin(), covered.end(), 1)) / static_cast<double>(n_steps);
  const double target = 0.088, f = (target - coverage) / (1.0 - coverage);
  const auto planted = static_cast<std::size_t>(std::lround(f * static_cast<double>(n_events)));
  std::vector<Event> events;
  std::uniform_int_distribution<std::size_t> pick(0, n_transitions - 1), offset(0, 2 * window), anywhere(0, n_steps - 1);
  for (std::size_t i = 0; i < n_events; ++i) {
    std::size_t pos;
    if (i < planted) {
      const auto step = transitions[pick(gen)].step;
      pos = std::min(n_steps - 1, (step >= window ? step - window : 0) + offset(gen));
    } else {
      pos = anywhere(gen);
    }
    events.push_back({pos, EventKind::protection_hard, {}});
  }
  const auto rep = associate(transitions, events, n_steps, {window, 1000, 77, 0});
  const double eff = rep.effectiveness();
  const double null_rate = *rep.null_expected_associated / static_cast<double>(n_events);

  // null-only harness
  std::vector<double> pvalues;
  const std::size_t null_steps = 50000;
  for (std::uint64_t run = 0; run < 200; ++run) {
    const auto tr = random_transitions(2000, null_steps, gen);
    std::uniform_int_distribution<std::size_t> u(0, null_steps - 1);
    std::vector<Event> ev;
    for (int i = 0; i < 2000; ++i)
      ev.push_back({u(gen), EventKind::news_spike, {}});
    pvalues.push_back(*associate(tr, ev, null_steps, {window, 200, 1000 + run, 0}).p_value);
  }
  const double ks = oracle::ks_uniform(pvalues);
  const bool pass = std::abs(eff - 0.088) <= 0.01 && std::abs(null_rate - 0.023) <= 0.005 &&
                    *rep.p_value <= 0.01 && ks <= 0.1;
  return {pass, fmt("effectiveness %.2f%% (target 8.8%%), null %.2f%%, p = %.4f; null-only KS %.3f over 200 runs",
                    100 * eff, 100 * null_rate, *rep.p_value, ks)};
}

// 8. revert coder against the quadratic oracle
Outcome revert_coder() {
  std::mt19937_64 gen(8);
  std::size_t mismatches = 0, reverts = 0, excluded = 0;
  for (int log = 0; log < 100; ++log) {
    std::vector<RevisionRecord> revs;
    std::uniform_int_distribution<int> user(0, 4);
    std::bernoulli_distribution revert(0.3), same(0.35);
    std::string last = "u0";
    for (std::size_t i = 0; i < 500; ++i) {
      std::string hash = "h" + std::to_string(i);
      if (i > 0 && revert(gen))
        hash = revs[i - 1 - std::uniform_int_distribution<std::size_t>(0, std::min<std::size_t>(i - 1, 6))(gen)]
                   .content_hash;
      const std::string u = same(gen) ? last : "u" + std::to_string(user(gen));
      revs.push_back({"r" + std::to_string(i), hash, u, static_cast<std::int64_t>(i * 60), std::nullopt});
      last = u;
    }
    const auto fast = code_reverts(revs).symbols;
    const auto slow = oracle::code_reverts_bruteforce(revs);
    mismatches += fast != slow;
    std::unordered_set<std::string> seen;
    for (std::size_t j = 0; j < revs.size(); ++j) {
      if (seen.count(revs[j].content_hash))
        excluded += slow[j] == kNonRevert;
      reverts += slow[j] == kRevert;
      seen.insert(revs[j].content_hash);
    }
  }
  return {mismatches == 0 && excluded > 0,
          fmt("100 logs of 500 revisions, %zu mismatching logs, %zu reverts, %zu self-reverts excluded",
              mismatches, reverts, excluded)};
}

// 9. byte-identical outputs regardless of thread count
std::string pipeline_outputs(unsigned threads) {
  std::ostringstream all;
  const auto truth = planted_four_state(1e-2);
  io::write_model(all, truth);
  const auto g = generate(truth, 3000, 9);
  io::write_sequence(all, g.sequence);
  io::write_path(all, g.path.states);

  FitConfig cfg;
  cfg.restarts = 8;
  cfg.seed = 9;
  cfg.threads = threads;
  const auto sel = select_states(g.sequence, {2, 4}, cfg);
  all << io::to_json(sel, Criterion::aic).dump(2);
  const auto &model = sel.model_for(4);
  io::write_model(all, model);

  const auto s = spectral_summary(model);
  all << io::to_json(s).dump(2) << io::to_json(mixing_bounds(s, 0.25)).dump(2);
  all << io::to_json(null_tau(model, 200, 9, threads)).dump(2);

  const auto seg = segment(model, s, g.sequence);
  all << io::to_json(seg).dump(2) << io::to_json(subspace_stats(seg, g.sequence)).dump(2);
  io::write_transitions(all, seg.transitions);
  const std::size_t lengths[] = {2, 3, 4, 5};
  for (const auto &t : motif_table(seg, g.sequence, lengths))
    io::write_motif_csv(all, t);

  std::vector<Event> events;
  for (std::size_t p = 5; p < g.sequence.size(); p += 97)
    events.push_back({p, EventKind::protection_hard, {}});
  all << io::to_json(associate(seg.transitions, events, g.sequence.size(), {10, 300, 9, threads})).dump(2);

  FitConfig rcfg = cfg;
  rcfg.restarts = 4;
  all << io::to_json(recovery_experiment(coin(0.3), 3, {1, 2}, rcfg, 2000)).dump(2);
  return all.str();
}

Outcome determinism() {
  const auto one = pipeline_outputs(1);
  const auto again = pipeline_outputs(1);
  const auto four = pipeline_outputs(4);
  const auto all = pipeline_outputs(0);
  const bool pass = one == again && one == four && one == all;
  return {pass, fmt("%zu bytes of output; rerun %s, 4 threads %s, all cores %s", one.size(),
                    one == again ? "identical" : "DIFFERENT", one == four ? "identical" : "DIFFERENT",
                    one == all ? "identical" : "DIFFERENT")};
}

} // namespace

int main(int argc, char **argv) {
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
      {"exact-inference oracle", exact_inference},
      {"spectral closed forms", spectral_closed_forms},
      {"state-count recovery", state_count_recovery},
      {"null-model separation", null_separation},
      {"epoch recovery", epoch_recovery},
      {"motif signature", motif_signature},
      {"association calibration", association_calibration},
      {"revert-coder equivalence", revert_coder},
      {"determinism", determinism},
  };
  std::vector<std::size_t> which;
  if (argc > 1) {
    const int k = std::atoi(argv[1]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: acceptance [1-%zu]\n", criteria.size());
      return 2;
    }
    which.push_back(static_cast<std::size_t>(k));
  } else {
    for (std::size_t k = 1; k <= criteria.size(); ++k)
      which.push_back(k);
  }
  bool ok = true;
  for (auto k : which) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
      o = criteria[k - 1].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu (%s): %s  %s  [%.1f s]\n", k, criteria[k - 1].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
