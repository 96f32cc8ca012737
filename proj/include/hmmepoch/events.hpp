#pragma once

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <string_view>
#include <vector>

#include "epoch.hpp"
#include "hmm.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace hmmepoch {

enum class EventKind { protection_hard, protection_soft, anti_social_dominance, news_spike };

inline const char *to_string(EventKind k) {
  switch (k) {
  case EventKind::protection_hard:
    return "protection_hard";
  case EventKind::protection_soft:
    return "protection_soft";
  case EventKind::anti_social_dominance:
    return "anti_social_dominance";
  case EventKind::news_spike:
    return "news_spike";
  }
  return "?";
}

inline EventKind event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::protection_hard, EventKind::protection_soft,
                 EventKind::anti_social_dominance, EventKind::news_spike})
    if (s == to_string(k))
      return k;
  throw InvalidInput("unknown event kind '" + std::string(s) + "'");
}

inline bool is_protection(EventKind k) {
  return k == EventKind::protection_hard || k == EventKind::protection_soft;
}

struct Event {
  std::size_t position; // edit index
  EventKind kind;
  std::map<std::string, std::string> payload;
};

struct AssociationReport {
  std::optional<EventKind> kind; // set when every event shares one kind
  std::size_t window = 0;
  std::size_t n_events = 0;
  std::size_t n_events_associated = 0; // effectiveness numerator
  std::size_t n_transitions = 0;
  std::size_t n_transitions_associated = 0; // explanatory-power numerator
  std::optional<double> null_expected_associated; // events side
  std::optional<double> null_expected_transitions_associated;
  std::optional<double> p_value;             // events side, one-sided
  std::optional<double> p_value_transitions; // transitions side
  bool valence_applicable = false;
  std::optional<double> valence_fraction;

  double effectiveness() const {
    return n_events ? static_cast<double>(n_events_associated) / static_cast<double>(n_events) : 0.0;
  }
  double explanatory_power() const {
    return n_transitions ? static_cast<double>(n_transitions_associated) /
                               static_cast<double>(n_transitions)
                         : 0.0;
  }
};

namespace detail {

inline std::size_t distance(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

/// Sorted transition steps.
inline std::vector<std::size_t> transition_steps(const std::vector<Transition> &transitions) {
  std::vector<std::size_t> steps;
  steps.reserve(transitions.size());
  for (const auto &t : transitions)
    steps.push_back(t.step);
  std::sort(steps.begin(), steps.end());
  return steps;
}

inline bool near_any(const std::vector<std::size_t> &sorted, std::size_t pos, std::size_t window) {
  const std::size_t lo = pos >= window ? pos - window : 0;
  auto it = std::lower_bound(sorted.begin(), sorted.end(), lo);
  return it != sorted.end() && *it <= pos + window;
}

} // namespace detail

/// Every (event index, transition index) pair within `window` edits of each other.
inline std::vector<std::pair<std::size_t, std::size_t>>
association_pairs(const std::vector<Transition> &transitions, const std::vector<Event> &events,
                  std::size_t window) {
  std::vector<std::size_t> order(transitions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return transitions[a].step < transitions[b].step; });
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t e = 0; e < events.size(); ++e) {
    const std::size_t pos = events[e].position;
    const std::size_t lo = pos >= window ? pos - window : 0;
    auto it = std::lower_bound(order.begin(), order.end(), lo, [&](std::size_t idx, std::size_t v) {
      return transitions[idx].step < v;
    });
    for (; it != order.end() && transitions[*it].step <= pos + window; ++it)
      pairs.emplace_back(e, *it);
  }
  return pairs;
}

struct ValenceReport {
  std::size_t hard_pairs = 0, hard_matches = 0;
  std::size_t soft_pairs = 0, soft_matches = 0;
  std::optional<double> hard_fraction; // hard protection followed by a move to low conflict
  std::optional<double> soft_fraction; // release followed by a move to high conflict

  std::optional<double> overall() const {
    const auto pairs = hard_pairs + soft_pairs;
    if (!pairs)
      return std::nullopt;
    return static_cast<double>(hard_matches + soft_matches) / static_cast<double>(pairs);
  }
};

/// Pairs each associated protection event with its nearest transition (ties
/// go to the later transition) and checks the direction.
inline ValenceReport valence(const std::vector<Transition> &transitions,
                             const std::vector<Event> &events, std::size_t window) {
  ValenceReport v;
  std::vector<Transition> sorted = transitions;
  std::sort(sorted.begin(), sorted.end(),
            [](const Transition &a, const Transition &b) { return a.step < b.step; });
  for (const auto &e : events) {
    if (!is_protection(e.kind))
      throw InvalidInput("valence applies to protection events only");
    const Transition *best = nullptr;
    const std::size_t lo = e.position >= window ? e.position - window : 0;
    auto it = std::lower_bound(sorted.begin(), sorted.end(), lo,
                               [](const Transition &t, std::size_t s) { return t.step < s; });
    for (; it != sorted.end() && it->step <= e.position + window; ++it)
      if (!best || detail::distance(it->step, e.position) <= detail::distance(best->step, e.position))
        best = &*it;
    if (!best)
      continue;
    if (e.kind == EventKind::protection_hard) {
      ++v.hard_pairs;
      v.hard_matches += best->direction == Direction::to_low;
    } else {
      ++v.soft_pairs;
      v.soft_matches += best->direction == Direction::to_high;
    }
  }
  if (v.hard_pairs)
    v.hard_fraction = static_cast<double>(v.hard_matches) / static_cast<double>(v.hard_pairs);
  if (v.soft_pairs)
    v.soft_fraction = static_cast<double>(v.soft_matches) / static_cast<double>(v.soft_pairs);
  return v;
}

struct AssociateConfig {
  std::size_t window = 10;
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Windowed association between events and epoch transitions, with a Monte
/// Carlo null that redraws event positions uniformly over [0, n_steps).
inline AssociationReport associate(const std::vector<Transition> &transitions,
                                   const std::vector<Event> &events, std::size_t n_steps,
                                   const AssociateConfig &config) {
  if (config.window < 1)
    throw InvalidInput("window must be at least 1");
  if (config.replicates < 100)
    throw InvalidInput("at least 100 null replicates are required");
  for (const auto &e : events)
    if (e.position >= n_steps)
      throw InvalidInput("event position " + std::to_string(e.position) +
                         " beyond sequence length " + std::to_string(n_steps));

  AssociationReport rep;
  rep.window = config.window;
  rep.n_events = events.size();
  rep.n_transitions = transitions.size();
  if (!events.empty() && std::all_of(events.begin(), events.end(), [&](const Event &e) {
        return e.kind == events.front().kind;
      }))
    rep.kind = events.front().kind;
  if (events.empty() || transitions.empty())
    return rep;

  const auto pairs = association_pairs(transitions, events, config.window);
  {
    std::vector<bool> ev(events.size(), false), tr(transitions.size(), false);
    for (const auto &[e, t] : pairs)
      ev[e] = tr[t] = true;
    rep.n_events_associated = static_cast<std::size_t>(std::count(ev.begin(), ev.end(), true));
    rep.n_transitions_associated = static_cast<std::size_t>(std::count(tr.begin(), tr.end(), true));
  }

  const auto steps = detail::transition_steps(transitions);
  std::vector<std::size_t> null_events(config.replicates), null_transitions(config.replicates);
  parallel_for(config.replicates, config.threads, [&](std::size_t r) {
    Rng rng(derive_seed(config.seed, r));
    std::vector<std::size_t> positions(events.size());
    std::size_t hits = 0;
    for (auto &p : positions) {
      p = rng.below(n_steps);
      hits += detail::near_any(steps, p, config.window);
    }
    std::sort(positions.begin(), positions.end());
    std::size_t explained = 0;
    for (auto s : steps)
      explained += detail::near_any(positions, s, config.window);
    null_events[r] = hits;
    null_transitions[r] = explained;
  });

  double sum_e = 0, sum_t = 0;
  std::size_t ge_e = 0, ge_t = 0;
  for (std::size_t r = 0; r < config.replicates; ++r) {
    sum_e += static_cast<double>(null_events[r]);
    sum_t += static_cast<double>(null_transitions[r]);
    ge_e += null_events[r] >= rep.n_events_associated;
    ge_t += null_transitions[r] >= rep.n_transitions_associated;
  }
  const double reps = static_cast<double>(config.replicates);
  rep.null_expected_associated = sum_e / reps;
  rep.null_expected_transitions_associated = sum_t / reps;
  rep.p_value = static_cast<double>(ge_e) / reps;
  rep.p_value_transitions = static_cast<double>(ge_t) / reps;

  if (std::all_of(events.begin(), events.end(), [](const Event &e) { return is_protection(e.kind); })) {
    rep.valence_applicable = true;
    rep.valence_fraction = valence(transitions, events, config.window).overall();
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Anti-social users

struct UserBlockRecord {
  std::string user_id;
  std::size_t total_edits = 1;
  std::size_t total_blocks = 0;

  double blocking_rate() const {
    return static_cast<double>(total_blocks) / static_cast<double>(total_edits);
  }
};

struct AntiSocialConfig {
  std::size_t window = 10;
  double percentile = 0.95;
  std::size_t sample_size = 1000; // editors drawn with replacement
  std::uint64_t seed = 0;
};

namespace detail {

inline std::unordered_map<std::string, double>
rate_table(const std::vector<UserBlockRecord> &records) {
  std::unordered_map<std::string, double> rates;
  for (const auto &r : records) {
    if (r.total_edits < 1)
      throw InvalidInput("user " + r.user_id + " has a block record with zero edits");
    rates[r.user_id] = r.blocking_rate();
  }
  return rates;
}

inline double rate_of(const std::unordered_map<std::string, double> &rates, const std::string &user) {
  auto it = rates.find(user);
  return it == rates.end() ? 0.0 : it->second;
}

} // namespace detail

/// Percentile of blocking rate over a seeded with-replacement sample of the
/// page's distinct editors (users without a record count as rate 0).
inline double blocking_threshold(const AnnotatedSequence &seq,
                                 const std::vector<UserBlockRecord> &records,
                                 const AntiSocialConfig &config) {
  if (!seq.user_ids)
    throw InvalidInput("anti-social flags need per-edit user ids");
  if (!(config.percentile > 0.0 && config.percentile < 1.0))
    throw InvalidInput("percentile must lie in (0, 1)");
  if (config.sample_size < 1)
    throw InvalidInput("sample size must be at least 1");
  const auto rates = detail::rate_table(records);
  std::vector<std::string> editors; // first-appearance order
  std::unordered_set<std::string> seen;
  for (const auto &u : *seq.user_ids)
    if (seen.insert(u).second)
      editors.push_back(u);
  if (editors.empty())
    throw InsufficientData("sequence has no editors");

  Rng rng(config.seed);
  std::vector<double> sample(config.sample_size);
  for (auto &s : sample)
    s = detail::rate_of(rates, editors[rng.below(editors.size())]);
  std::sort(sample.begin(), sample.end());
  const auto idx = static_cast<std::size_t>(
      std::ceil(config.percentile * static_cast<double>(sample.size())));
  return sample[std::clamp<std::size_t>(idx, 1, sample.size()) - 1];
}

/// Editor with the most edits in the `window` edits before `point`; ties go to
/// whoever appears first in that window. Empty when point == 0.
inline std::optional<std::string> dominant_user(const std::vector<std::string> &users,
                                                std::size_t point, std::size_t window) {
  const std::size_t lo = point >= window ? point - window : 0;
  if (lo >= point)
    return std::nullopt;
  std::unordered_map<std::string_view, std::size_t> counts;
  for (std::size_t t = lo; t < point; ++t)
    ++counts[users[t]];
  std::string_view best;
  std::size_t best_count = 0;
  for (std::size_t t = lo; t < point; ++t) {
    const auto c = counts[users[t]];
    if (c > best_count) {
      best_count = c;
      best = users[t];
    }
  }
  return std::string(best);
}

/// One anti_social_dominance event at each transition whose dominant editor's
/// blocking rate is strictly above the threshold.
inline std::vector<Event> anti_social_flags(const AnnotatedSequence &seq,
                                            const std::vector<UserBlockRecord> &records,
                                            const std::vector<Transition> &transitions,
                                            const AntiSocialConfig &config) {
  const double threshold = blocking_threshold(seq, records, config);
  const auto rates = detail::rate_table(records);
  std::vector<Event> out;
  for (const auto &tr : transitions) {
    const auto user = dominant_user(*seq.user_ids, tr.step, config.window);
    if (!user)
      continue;
    const double rate = detail::rate_of(rates, *user);
    if (rate > threshold) {
      Event e{tr.step, EventKind::anti_social_dominance, {}};
      e.payload["user"] = *user;
      e.payload["blocking_rate"] = std::to_string(rate);
      e.payload["threshold"] = std::to_string(threshold);
      out.push_back(std::move(e));
    }
  }
  return out;
}

/// Compares the share of transitions dominated by an anti-social editor with
/// the share at uniformly drawn positions (same count as transitions).
inline AssociationReport anti_social_association(const AnnotatedSequence &seq,
                                                 const std::vector<UserBlockRecord> &records,
                                                 const std::vector<Transition> &transitions,
                                                 const AntiSocialConfig &config,
                                                 std::size_t replicates) {
  if (replicates < 100)
    throw InvalidInput("at least 100 null replicates are required");
  const double threshold = blocking_threshold(seq, records, config);
  const auto rates = detail::rate_table(records);
  const auto &users = *seq.user_ids;
  const std::size_t n = users.size();

  std::vector<char> flagged(n, 0);
  for (std::size_t t = 1; t < n; ++t) {
    const auto u = dominant_user(users, t, config.window);
    flagged[t] = u && detail::rate_of(rates, *u) > threshold;
  }

  AssociationReport rep;
  rep.kind = EventKind::anti_social_dominance;
  rep.window = config.window;
  rep.n_transitions = transitions.size();
  for (const auto &tr : transitions)
    if (tr.step < n && flagged[tr.step])
      ++rep.n_transitions_associated;
  rep.n_events = rep.n_transitions_associated;
  rep.n_events_associated = rep.n_transitions_associated;
  if (transitions.empty() || n < 2)
    return rep;

  double sum = 0;
  std::size_t ge = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    Rng rng(derive_seed(config.seed ^ 0xA5A5A5A5ULL, r));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < transitions.size(); ++i)
      hits += flagged[1 + rng.below(n - 1)];
    sum += static_cast<double>(hits);
    ge += hits >= rep.n_transitions_associated;
  }
  rep.null_expected_transitions_associated = sum / static_cast<double>(replicates);
  rep.null_expected_associated = rep.null_expected_transitions_associated;
  rep.p_value_transitions = static_cast<double>(ge) / static_cast<double>(replicates);
  rep.p_value = rep.p_value_transitions;
  return rep;
}

// ---------------------------------------------------------------------------
// News spikes

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kNewsWindowDays = 4;

/// Smallest k with P(X <= k) >= confidence for X ~ Poisson(mean).
inline std::size_t poisson_upper_bound(double mean, double confidence) {
  if (!(mean > 0.0))
    return 0;
  std::size_t k = 0;
  while (boost::math::gamma_q(static_cast<double>(k + 1), mean) < confidence)
    ++k;
  return k;
}

struct NewsScan {
  double baseline_per_day = 0.0;
  std::vector<std::size_t> daily_counts;
  std::vector<std::size_t> window_counts;
  std::vector<bool> flagged_days;
  std::vector<std::size_t> peak_days; // one per merged spike
  std::vector<Event> events;
};

/// Days whose four-day article count (days d-2 .. d+1, clipped to the page
/// lifetime) exceeds the one-sided Poisson bound at `confidence` under the
/// lifetime baseline rate. Consecutive flagged days merge into one event at
/// the day with the most articles, mapped to the nearest edit.
inline NewsScan news_scan(const std::vector<std::int64_t> &article_timestamps,
                          const AnnotatedSequence &seq, double confidence = 0.95) {
  if (!seq.timestamps || seq.timestamps->empty())
    throw InvalidInput("news spikes need edit timestamps");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw InvalidInput("confidence must lie in (0, 1)");
  const auto &ts = *seq.timestamps;
  const std::int64_t first = ts.front(), last = ts.back();
  const double lifetime_days = static_cast<double>(last - first) / kSecondsPerDay;
  if (lifetime_days < 8.0)
    throw InsufficientData("page lifetime shorter than 8 days");
  const auto n_days = static_cast<std::size_t>((last - first) / kSecondsPerDay) + 1;

  NewsScan scan;
  scan.daily_counts.assign(n_days, 0);
  std::size_t in_lifetime = 0;
  for (auto a : article_timestamps) {
    if (a < first || a > last)
      continue;
    ++scan.daily_counts[static_cast<std::size_t>((a - first) / kSecondsPerDay)];
    ++in_lifetime;
  }
  scan.baseline_per_day = static_cast<double>(in_lifetime) / lifetime_days;

  scan.window_counts.assign(n_days, 0);
  scan.flagged_days.assign(n_days, false);
  std::map<std::size_t, std::size_t> bound_cache; // covered days -> bound
  for (std::size_t d = 0; d < n_days; ++d) {
    const std::size_t lo = d >= 2 ? d - 2 : 0;
    const std::size_t hi = std::min(n_days, d + 2); // exclusive
    std::size_t count = 0;
    for (std::size_t j = lo; j < hi; ++j)
      count += scan.daily_counts[j];
    scan.window_counts[d] = count;
    const std::size_t covered = hi - lo;
    auto it = bound_cache.find(covered);
    if (it == bound_cache.end())
      it = bound_cache
               .emplace(covered, poisson_upper_bound(scan.baseline_per_day * static_cast<double>(covered),
                                                     confidence))
               .first;
    scan.flagged_days[d] = count > it->second;
  }

  for (std::size_t d = 0; d < n_days;) {
    if (!scan.flagged_days[d]) {
      ++d;
      continue;
    }
    std::size_t peak = d;
    std::size_t e = d;
    for (; e < n_days && scan.flagged_days[e]; ++e)
      if (scan.daily_counts[e] > scan.daily_counts[peak])
        peak = e;
    scan.peak_days.push_back(peak);
    const std::int64_t target =
        first + static_cast<std::int64_t>(peak) * kSecondsPerDay + kSecondsPerDay / 2;
    auto it = std::lower_bound(ts.begin(), ts.end(), target);
    std::size_t idx = static_cast<std::size_t>(it - ts.begin());
    if (idx == ts.size() || (idx > 0 && target - ts[idx - 1] <= *it - target))
      idx = idx == 0 ? 0 : idx - 1;
    Event ev{idx, EventKind::news_spike, {}};
    ev.payload["day"] = std::to_string(peak);
    ev.payload["articles"] = std::to_string(scan.daily_counts[peak]);
    scan.events.push_back(std::move(ev));
    d = e;
  }
  return scan;
}

inline std::vector<Event> news_spikes(const std::vector<std::int64_t> &article_timestamps,
                                      const AnnotatedSequence &seq, double confidence = 0.95) {
  return news_scan(article_timestamps, seq, confidence).events;
}

} // namespace hmmepoch
