#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hmm.hpp"
#include "inference.hpp"
#include "random.hpp"
#include "spectral.hpp"

namespace hmmepoch {

/// Epoch naming: `high` is the subspace with the larger revert fraction.
enum class Conflict { high, low };

enum class Direction { to_low, to_high };

inline const char *to_string(Conflict c) { return c == Conflict::high ? "high" : "low"; }
inline const char *to_string(Direction d) { return d == Direction::to_low ? "to_low" : "to_high"; }

struct Transition {
  std::size_t step; // first step of the new epoch
  Direction direction;
  friend bool operator==(const Transition &, const Transition &) = default;
};

struct Run {
  std::size_t start;
  std::size_t length;
  Conflict label;
  friend bool operator==(const Run &, const Run &) = default;
};

/// Default flicker threshold: a switch counts only after more than ten steps.
inline constexpr std::size_t kDefaultMinRun = 11;

struct EpochSegmentation {
  std::vector<Conflict> step_labels;
  std::vector<Transition> transitions;
  std::vector<Run> runs;
  std::optional<double> trapping_time_high; // mean run length, censored runs included
  std::optional<double> trapping_time_low;
  std::size_t min_run = kDefaultMinRun;

  // Filled by segment(); empty when built directly from labels.
  std::vector<StateIndex> viterbi_states;
  std::vector<Subspace> state_subspaces;
  std::optional<Subspace> high_subspace;

  std::size_t size() const noexcept { return step_labels.size(); }
};

namespace detail {

template <class Label> std::vector<std::pair<std::size_t, std::size_t>> label_runs(std::span<const Label> labels) {
  std::vector<std::pair<std::size_t, std::size_t>> runs; // (start, length)
  for (std::size_t i = 0; i < labels.size();) {
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j] == labels[i])
      ++j;
    runs.emplace_back(i, j - i);
    i = j;
  }
  return runs;
}

} // namespace detail

/// Flicker removal. A switch registers only when the new label persists for at
/// least `min_run` consecutive steps; shorter excursions take the label of the
/// epoch around them. The opening label is that of the first run reaching
/// min_run (the longest run if none does).
template <class Label>
std::vector<Label> coarse_grain(std::span<const Label> raw, std::size_t min_run) {
  if (raw.empty())
    return {};
  if (min_run < 1)
    throw InvalidInput("min_run must be at least 1");
  const auto runs = detail::label_runs(raw);
  std::size_t opener = 0;
  bool found = false;
  for (std::size_t r = 0; r < runs.size(); ++r)
    if (runs[r].second >= min_run) {
      opener = r;
      found = true;
      break;
    }
  if (!found)
    for (std::size_t r = 1; r < runs.size(); ++r)
      if (runs[r].second > runs[opener].second)
        opener = r;

  std::vector<Label> out(raw.size());
  Label current = raw[runs[opener].first];
  for (const auto &[start, length] : runs) {
    if (raw[start] != current && length >= min_run)
      current = raw[start];
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(start),
              out.begin() + static_cast<std::ptrdiff_t>(start + length), current);
  }
  return out;
}

template <class Label>
std::vector<Label> coarse_grain(const std::vector<Label> &raw, std::size_t min_run) {
  return coarse_grain(std::span<const Label>(raw), min_run);
}

/// Runs, transitions and per-label mean run lengths for already-coarse labels.
inline EpochSegmentation segmentation_from_labels(std::vector<Conflict> labels,
                                                  std::size_t min_run = kDefaultMinRun) {
  EpochSegmentation seg;
  seg.min_run = min_run;
  seg.step_labels = std::move(labels);
  for (const auto &[start, length] : detail::label_runs(std::span<const Conflict>(seg.step_labels))) {
    const Conflict label = seg.step_labels[start];
    seg.runs.push_back({start, length, label});
    if (start > 0)
      seg.transitions.push_back(
          {start, label == Conflict::low ? Direction::to_low : Direction::to_high});
  }
  double sum[2] = {0, 0};
  std::size_t count[2] = {0, 0};
  for (const auto &r : seg.runs) {
    const int i = r.label == Conflict::high ? 0 : 1;
    sum[i] += static_cast<double>(r.length);
    ++count[i];
  }
  if (count[0])
    seg.trapping_time_high = sum[0] / static_cast<double>(count[0]);
  if (count[1])
    seg.trapping_time_low = sum[1] / static_cast<double>(count[1]);
  return seg;
}

namespace detail {

inline std::optional<double> revert_fraction(std::span<const Subspace> labels,
                                             std::span<const Symbol> symbols, Subspace which) {
  std::size_t n = 0, r = 0;
  for (std::size_t t = 0; t < labels.size(); ++t)
    if (labels[t] == which) {
      ++n;
      r += symbols[t] == kRevert;
    }
  if (n == 0)
    return std::nullopt;
  return static_cast<double>(r) / static_cast<double>(n);
}

} // namespace detail

/// Segments from per-step raw subspace labels. The subspace with the larger
/// empirical revert fraction (over coarse-grained steps) is named high; exact
/// ties go to the subspace holding step 0. If only one subspace occurs, the
/// optional model-based revert probabilities decide instead.
inline EpochSegmentation segment_labels(std::span<const Subspace> raw,
                                        std::span<const Symbol> symbols,
                                        std::size_t min_run = kDefaultMinRun,
                                        std::optional<std::pair<double, double>> model_revert = {}) {
  if (raw.size() != symbols.size())
    throw InvalidInput("label and symbol counts differ");
  if (raw.empty())
    throw InvalidInput("cannot segment an empty sequence");
  const auto coarse = coarse_grain(raw, min_run);
  const auto f1 = detail::revert_fraction(coarse, symbols, Subspace::one);
  const auto f2 = detail::revert_fraction(coarse, symbols, Subspace::two);

  Subspace high;
  if (f1 && f2) {
    if (*f1 != *f2)
      high = *f1 > *f2 ? Subspace::one : Subspace::two;
    else
      high = coarse[0];
  } else if (model_revert && model_revert->first != model_revert->second) {
    high = model_revert->first > model_revert->second ? Subspace::one : Subspace::two;
  } else {
    high = coarse[0];
  }

  std::vector<Conflict> labels(coarse.size());
  std::transform(coarse.begin(), coarse.end(), labels.begin(),
                 [&](Subspace s) { return s == high ? Conflict::high : Conflict::low; });
  auto seg = segmentation_from_labels(std::move(labels), min_run);
  seg.high_subspace = high;
  return seg;
}

/// Viterbi path -> per-step subspace -> flicker removal -> high/low naming.
inline EpochSegmentation segment(const Hmm &hmm, const SpectralSummary &summary,
                                 const AnnotatedSequence &seq,
                                 std::size_t min_run = kDefaultMinRun) {
  const auto split = subspace_split(summary);
  if (split.size() != hmm.n_states())
    throw InvalidInput("spectral summary does not belong to this model");
  auto path = viterbi(hmm, seq);

  std::vector<Subspace> raw(seq.size());
  for (std::size_t t = 0; t < raw.size(); ++t)
    raw[t] = split[path.states[t]];

  // stationary-weighted revert probability of each subspace, used only when
  // one subspace never appears in the decoded path
  std::optional<std::pair<double, double>> model_revert;
  if (hmm.alphabet_size() > kRevert) {
    double w[2] = {0, 0}, r[2] = {0, 0};
    for (std::size_t i = 0; i < split.size(); ++i) {
      const int s = split[i] == Subspace::one ? 0 : 1;
      w[s] += summary.stationary(static_cast<Eigen::Index>(i));
      r[s] += summary.stationary(static_cast<Eigen::Index>(i)) *
              hmm.emission()(static_cast<Eigen::Index>(i), kRevert);
    }
    if (w[0] > 0 && w[1] > 0)
      model_revert = std::make_pair(r[0] / w[0], r[1] / w[1]);
  }

  auto seg = segment_labels(raw, seq.symbols, min_run, model_revert);
  seg.viterbi_states = std::move(path.states);
  seg.state_subspaces = split;
  return seg;
}

struct TrappingTimes {
  std::optional<double> mean_high;
  std::optional<double> mean_low;
  std::optional<double> overall;
};

/// Mean run length per label and pooled. The first and last runs are
/// censored by the observation window; `include_censored = false` drops them.
inline TrappingTimes trapping_times(const EpochSegmentation &seg, bool include_censored = true) {
  if (seg.runs.empty())
    throw InvalidInput("segmentation has no runs");
  std::span<const Run> runs(seg.runs);
  if (!include_censored)
    runs = runs.size() <= 2 ? std::span<const Run>{} : runs.subspan(1, runs.size() - 2);
  double sum[2] = {0, 0};
  std::size_t count[2] = {0, 0};
  for (const auto &r : runs) {
    const int i = r.label == Conflict::high ? 0 : 1;
    sum[i] += static_cast<double>(r.length);
    ++count[i];
  }
  TrappingTimes out;
  if (count[0])
    out.mean_high = sum[0] / static_cast<double>(count[0]);
  if (count[1])
    out.mean_low = sum[1] / static_cast<double>(count[1]);
  if (count[0] + count[1])
    out.overall = (sum[0] + sum[1]) / static_cast<double>(count[0] + count[1]);
  return out;
}

// ---------------------------------------------------------------------------
// Motifs

inline constexpr double kMotifSmoothing = 0.5;

struct MotifRow {
  std::string pattern;
  std::size_t count_high;
  std::size_t count_low;
  double p_high;
  double q_low;
  double mixture; // (p + q) / 2
  double partial_kl_high; // p ln(p / m)
  double partial_kl_low;  // q ln(q / m)
};

struct MotifTable {
  std::size_t motif_length;
  std::size_t windows_high;
  std::size_t windows_low;
  double smoothing_floor; // smallest smoothed probability either column can hold
  std::vector<MotifRow> rows; // lexicographic pattern order
  std::vector<std::size_t> ranking_high; // row indices, partial_kl_high descending
  std::vector<std::size_t> ranking_low;

  const MotifRow &top_high(std::size_t rank = 0) const { return rows[ranking_high.at(rank)]; }
  const MotifRow &top_low(std::size_t rank = 0) const { return rows[ranking_low.at(rank)]; }
};

inline std::string motif_pattern(std::size_t code, std::size_t length, std::size_t alphabet) {
  std::string s(length, '?');
  for (std::size_t i = length; i-- > 0;) {
    const std::size_t d = code % alphabet;
    code /= alphabet;
    s[i] = alphabet == 2 ? (d == kRevert ? 'R' : 'C') : static_cast<char>('0' + d);
  }
  return s;
}

/// Overlapping windows of each length, counted only where the window lies
/// inside a single epoch; add-one-half smoothing before normalizing.
inline std::vector<MotifTable> motif_table(const EpochSegmentation &seg,
                                           const AnnotatedSequence &seq,
                                           std::span<const std::size_t> lengths) {
  if (seg.size() != seq.size())
    throw InvalidInput("segmentation and sequence lengths differ");
  const std::size_t k = std::max<std::size_t>(2, seq.min_alphabet());
  if (k > 10)
    throw InvalidInput("motif tables support alphabets of at most 10 symbols");
  std::vector<MotifTable> tables;
  for (std::size_t len : lengths) {
    if (len < 1 || len > 12)
      throw InvalidInput("motif length must be between 1 and 12");
    std::size_t patterns = 1;
    for (std::size_t i = 0; i < len; ++i)
      patterns *= k;
    std::vector<std::size_t> high(patterns, 0), low(patterns, 0);
    std::size_t n_high = 0, n_low = 0;
    for (const auto &run : seg.runs) {
      if (run.length < len)
        continue;
      auto &counts = run.label == Conflict::high ? high : low;
      auto &total = run.label == Conflict::high ? n_high : n_low;
      for (std::size_t s = run.start; s + len <= run.start + run.length; ++s) {
        std::size_t code = 0;
        for (std::size_t i = 0; i < len; ++i)
          code = code * k + seq.symbols[s + i];
        ++counts[code];
        ++total;
      }
    }
    if (n_high == 0 || n_low == 0)
      throw InsufficientData("no length-" + std::to_string(len) + " window fits inside any " +
                             (n_high == 0 ? "high" : "low") + "-conflict epoch");

    MotifTable table;
    table.motif_length = len;
    table.windows_high = n_high;
    table.windows_low = n_low;
    const double smooth_total = kMotifSmoothing * static_cast<double>(patterns);
    const double denom_high = static_cast<double>(n_high) + smooth_total;
    const double denom_low = static_cast<double>(n_low) + smooth_total;
    table.smoothing_floor = std::min(kMotifSmoothing / denom_high, kMotifSmoothing / denom_low);
    for (std::size_t c = 0; c < patterns; ++c) {
      MotifRow row;
      row.pattern = motif_pattern(c, len, k);
      row.count_high = high[c];
      row.count_low = low[c];
      row.p_high = (static_cast<double>(high[c]) + kMotifSmoothing) / denom_high;
      row.q_low = (static_cast<double>(low[c]) + kMotifSmoothing) / denom_low;
      row.mixture = 0.5 * (row.p_high + row.q_low);
      row.partial_kl_high = row.p_high * std::log(row.p_high / row.mixture);
      row.partial_kl_low = row.q_low * std::log(row.q_low / row.mixture);
      table.rows.push_back(std::move(row));
    }
    auto rank = [&](double MotifRow::*field) {
      std::vector<std::size_t> idx(patterns);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return table.rows[a].*field > table.rows[b].*field;
      });
      return idx;
    };
    table.ranking_high = rank(&MotifRow::partial_kl_high);
    table.ranking_low = rank(&MotifRow::partial_kl_low);
    tables.push_back(std::move(table));
  }
  return tables;
}

// ---------------------------------------------------------------------------
// Per-subspace statistics

struct RevertSummary {
  std::optional<double> fraction_high;
  std::optional<double> fraction_low;
  std::optional<double> ratio; // high / low; +inf when low is zero
  std::size_t steps_high = 0;
  std::size_t steps_low = 0;
};

struct CrFilteredStats {
  RevertSummary reverts;
  std::size_t pairs_removed = 0;
  bool empty_residue_high = false; // every high step belonged to a CR pair
  bool empty_residue_low = false;
};

struct SubspaceStats {
  RevertSummary reverts;
  std::optional<double> median_gap_high, median_gap_low; // seconds
  std::optional<double> mean_gap_high, mean_gap_low;
  std::optional<double> anon_fraction_high, anon_fraction_low;
  CrFilteredStats cr_filtered;
};

namespace detail {

inline RevertSummary summarize_reverts(const std::vector<Conflict> &labels,
                                       const std::vector<Symbol> &symbols,
                                       const std::vector<bool> *keep = nullptr) {
  RevertSummary s;
  std::size_t r_high = 0, r_low = 0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (keep && !(*keep)[t])
      continue;
    const bool rev = symbols[t] == kRevert;
    if (labels[t] == Conflict::high) {
      ++s.steps_high;
      r_high += rev;
    } else {
      ++s.steps_low;
      r_low += rev;
    }
  }
  if (s.steps_high)
    s.fraction_high = static_cast<double>(r_high) / static_cast<double>(s.steps_high);
  if (s.steps_low)
    s.fraction_low = static_cast<double>(r_low) / static_cast<double>(s.steps_low);
  if (s.fraction_high && s.fraction_low)
    s.ratio = *s.fraction_low > 0.0 ? *s.fraction_high / *s.fraction_low
                                    : std::numeric_limits<double>::infinity();
  return s;
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

} // namespace detail

/// Steps in adjacent C-then-R pairs within one epoch, scanned greedily left to right.
inline std::vector<bool> cr_pair_mask(const EpochSegmentation &seg, const AnnotatedSequence &seq) {
  std::vector<bool> keep(seq.size(), true);
  for (const auto &run : seg.runs) {
    const std::size_t end = run.start + run.length;
    for (std::size_t t = run.start; t + 1 < end;) {
      if (seq.symbols[t] == kNonRevert && seq.symbols[t + 1] == kRevert) {
        keep[t] = keep[t + 1] = false;
        t += 2;
      } else {
        ++t;
      }
    }
  }
  return keep;
}

inline SubspaceStats subspace_stats(const EpochSegmentation &seg, const AnnotatedSequence &seq,
                                    std::string_view anonymous_flag = "anon") {
  if (seg.size() != seq.size())
    throw InvalidInput("segmentation and sequence lengths differ");
  seq.validate();
  SubspaceStats st;
  st.reverts = detail::summarize_reverts(seg.step_labels, seq.symbols);

  if (seq.timestamps) {
    std::vector<double> gaps[2];
    for (std::size_t t = 1; t < seq.size(); ++t) {
      // gap belongs to the epoch of the later edit
      const int i = seg.step_labels[t] == Conflict::high ? 0 : 1;
      gaps[i].push_back(static_cast<double>((*seq.timestamps)[t] - (*seq.timestamps)[t - 1]));
    }
    auto fill = [](const std::vector<double> &g, std::optional<double> &median,
                   std::optional<double> &mean) {
      if (g.empty())
        return;
      median = detail::median_of(g);
      mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    };
    fill(gaps[0], st.median_gap_high, st.mean_gap_high);
    fill(gaps[1], st.median_gap_low, st.mean_gap_low);
  }

  if (seq.user_flags) {
    std::size_t anon[2] = {0, 0}, total[2] = {0, 0};
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const int i = seg.step_labels[t] == Conflict::high ? 0 : 1;
      ++total[i];
      anon[i] += (*seq.user_flags)[t] == anonymous_flag;
    }
    if (total[0])
      st.anon_fraction_high = static_cast<double>(anon[0]) / static_cast<double>(total[0]);
    if (total[1])
      st.anon_fraction_low = static_cast<double>(anon[1]) / static_cast<double>(total[1]);
  }

  const auto keep = cr_pair_mask(seg, seq);
  st.cr_filtered.pairs_removed =
      static_cast<std::size_t>(std::count(keep.begin(), keep.end(), false)) / 2;
  st.cr_filtered.reverts = detail::summarize_reverts(seg.step_labels, seq.symbols, &keep);
  st.cr_filtered.empty_residue_high =
      st.reverts.steps_high > 0 && st.cr_filtered.reverts.steps_high == 0;
  st.cr_filtered.empty_residue_low =
      st.reverts.steps_low > 0 && st.cr_filtered.reverts.steps_low == 0;
  return st;
}

// ---------------------------------------------------------------------------
// Editor turnover

struct TurnoverReport {
  std::optional<double> transition_persistence;
  std::optional<double> baseline_persistence;
  std::size_t transitions_used = 0;
  std::vector<std::size_t> skipped_transitions; // closer than `window` to an end
  std::size_t baseline_points = 0;
};

/// Share of the editors active in the `window` edits before `point` who also
/// edit in the `window` edits from `point` on.
inline double persistence_at(const std::vector<std::string> &users, std::size_t point,
                             std::size_t window) {
  std::unordered_set<std::string_view> before, after;
  for (std::size_t t = point - window; t < point; ++t)
    before.insert(users[t]);
  for (std::size_t t = point; t < point + window; ++t)
    after.insert(users[t]);
  std::size_t shared = 0;
  for (const auto &u : before)
    shared += after.count(u);
  return static_cast<double>(shared) / static_cast<double>(before.size());
}

inline TurnoverReport turnover(const EpochSegmentation &seg, const AnnotatedSequence &seq,
                               std::size_t window = 100, std::uint64_t seed = 0) {
  if (!seq.user_ids)
    throw InvalidInput("turnover needs per-edit user ids");
  if (window < 1)
    throw InvalidInput("window must be at least 1");
  if (seg.size() != seq.size())
    throw InvalidInput("segmentation and sequence lengths differ");
  const auto &users = *seq.user_ids;
  const std::size_t n = users.size();

  TurnoverReport out;
  double sum = 0.0;
  for (const auto &tr : seg.transitions) {
    if (tr.step < window || tr.step + window > n) {
      out.skipped_transitions.push_back(tr.step);
      continue;
    }
    sum += persistence_at(users, tr.step, window);
    ++out.transitions_used;
  }
  if (out.transitions_used)
    out.transition_persistence = sum / static_cast<double>(out.transitions_used);

  if (n >= 2 * window) {
    Rng rng(seed);
    const std::size_t span = n - 2 * window + 1; // valid points: [window, n - window]
    out.baseline_points = std::max<std::size_t>(seg.transitions.size(), 100);
    double base = 0.0;
    for (std::size_t i = 0; i < out.baseline_points; ++i)
      base += persistence_at(users, window + rng.below(span), window);
    out.baseline_persistence = base / static_cast<double>(out.baseline_points);
  }
  return out;
}

} // namespace hmmepoch
