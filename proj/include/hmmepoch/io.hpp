#pragma once

// File formats: JSON-Lines for streams, single JSON documents for models and
// reports, CSV for motif tables.

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "epoch.hpp"
#include "events.hpp"
#include "fit.hpp"
#include "hmm.hpp"
#include "revert.hpp"
#include "spectral.hpp"

namespace hmmepoch::io {

using Json = nlohmann::ordered_json;

namespace detail {

template <class F> auto parse_lines(std::istream &in, F &&per_line) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error &e) {
      throw InvalidInput("line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      per_line(j);
    } catch (const Json::exception &e) {
      throw InvalidInput("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InvalidInput &e) {
      throw InvalidInput("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline std::string opaque_string(const Json &j) {
  if (j.is_string())
    return j.get<std::string>();
  if (j.is_number_integer() || j.is_number_unsigned())
    return j.dump();
  throw InvalidInput("expected a string or integer identifier");
}

} // namespace detail

/// Finite doubles as numbers; infinities and NaN as strings so the output
/// stays valid JSON.
inline Json number(double x) {
  if (std::isfinite(x))
    return x;
  if (std::isnan(x))
    return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline Json number(const std::optional<double> &x) { return x ? number(*x) : Json(nullptr); }

inline double read_number(const Json &j) {
  if (j.is_number())
    return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf")
      return std::numeric_limits<double>::infinity();
    if (s == "-inf")
      return -std::numeric_limits<double>::infinity();
    if (s == "nan")
      return std::numeric_limits<double>::quiet_NaN();
  }
  throw InvalidInput("expected a number");
}

// ---------------------------------------------------------------------------
// Sequences

inline AnnotatedSequence read_sequence(std::istream &in) {
  AnnotatedSequence seq;
  std::vector<std::int64_t> ts;
  std::vector<std::string> users, flags;
  std::size_t n_ts = 0, n_users = 0, n_flags = 0;
  detail::parse_lines(in, [&](const Json &j) {
    const Json &sym = j.at("symbol");
    if (sym.is_string()) {
      const auto s = sym.get<std::string>();
      if (s == "C")
        seq.symbols.push_back(kNonRevert);
      else if (s == "R")
        seq.symbols.push_back(kRevert);
      else
        throw InvalidInput("symbol must be \"C\", \"R\" or a non-negative integer");
    } else if (sym.is_number_unsigned() || (sym.is_number_integer() && sym.get<std::int64_t>() >= 0)) {
      seq.symbols.push_back(sym.get<Symbol>());
    } else {
      throw InvalidInput("symbol must be \"C\", \"R\" or a non-negative integer");
    }
    if (j.contains("timestamp")) {
      ts.push_back(j["timestamp"].get<std::int64_t>());
      ++n_ts;
    } else {
      ts.push_back(0);
    }
    if (j.contains("user")) {
      users.push_back(detail::opaque_string(j["user"]));
      ++n_users;
    } else {
      users.emplace_back();
    }
    if (j.contains("flag")) {
      flags.push_back(j["flag"].get<std::string>());
      ++n_flags;
    } else {
      flags.emplace_back();
    }
  });
  const std::size_t n = seq.symbols.size();
  auto all_or_none = [n](std::size_t count, const char *field) {
    if (count != 0 && count != n)
      throw InvalidInput(std::string("field '") + field + "' present on some lines but not all");
    return count == n && n > 0;
  };
  if (all_or_none(n_ts, "timestamp"))
    seq.timestamps = std::move(ts);
  if (all_or_none(n_users, "user"))
    seq.user_ids = std::move(users);
  if (all_or_none(n_flags, "flag"))
    seq.user_flags = std::move(flags);
  seq.validate();
  return seq;
}

/// Binary alphabets are written as "C"/"R", larger ones as integers.
inline void write_sequence(std::ostream &out, const AnnotatedSequence &seq,
                           std::size_t alphabet_size = 0) {
  seq.validate();
  const std::size_t k = alphabet_size ? alphabet_size : std::max<std::size_t>(2, seq.min_alphabet());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    Json j;
    if (k == 2)
      j["symbol"] = seq.symbols[t] == kRevert ? "R" : "C";
    else
      j["symbol"] = seq.symbols[t];
    if (seq.timestamps)
      j["timestamp"] = (*seq.timestamps)[t];
    if (seq.user_ids)
      j["user"] = (*seq.user_ids)[t];
    if (seq.user_flags)
      j["flag"] = (*seq.user_flags)[t];
    out << j.dump() << '\n';
  }
}

inline void write_path(std::ostream &out, const std::vector<StateIndex> &states) {
  for (auto s : states)
    out << Json{{"state", s}}.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Models

inline Json to_json(const Hmm &hmm) {
  Json j;
  j["n_states"] = hmm.n_states();
  j["alphabet"] = hmm.alphabet_size();
  j["initial"] = Json::array();
  for (Eigen::Index i = 0; i < hmm.initial().size(); ++i)
    j["initial"].push_back(hmm.initial()(i));
  auto rows = [](const Matrix &m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        row.push_back(m(i, c));
      a.push_back(std::move(row));
    }
    return a;
  };
  j["transition"] = rows(hmm.transition());
  j["emission"] = rows(hmm.emission());
  return j;
}

inline Hmm model_from_json(const Json &j) {
  try {
    const auto n = j.at("n_states").get<std::size_t>();
    const auto k = j.at("alphabet").get<std::size_t>();
    if (n < 1 || k < 1)
      throw InvalidInput("model needs at least one state and one symbol");
    const auto init = j.at("initial").get<std::vector<double>>();
    const auto trans = j.at("transition").get<std::vector<std::vector<double>>>();
    const auto emit = j.at("emission").get<std::vector<std::vector<double>>>();
    if (init.size() != n || trans.size() != n || emit.size() != n)
      throw InvalidInput("model arrays do not match n_states");
    Vector pi(static_cast<Eigen::Index>(n));
    Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Matrix b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i) {
      pi(static_cast<Eigen::Index>(i)) = init[i];
      if (trans[i].size() != n || emit[i].size() != k)
        throw InvalidInput("model row " + std::to_string(i) + " has the wrong width");
      for (std::size_t c = 0; c < n; ++c)
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = trans[i][c];
      for (std::size_t c = 0; c < k; ++c)
        b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = emit[i][c];
    }
    return Hmm(std::move(pi), std::move(a), std::move(b));
  } catch (const Json::exception &e) {
    throw InvalidInput(std::string("malformed model: ") + e.what());
  }
}

inline Hmm read_model(std::istream &in) {
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error &e) {
    throw InvalidInput(std::string("model file is not JSON: ") + e.what());
  }
  return model_from_json(j);
}

inline void write_model(std::ostream &out, const Hmm &hmm) { out << to_json(hmm).dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// Revisions, transitions, events, block records, articles

inline std::vector<RevisionRecord> read_revisions(std::istream &in) {
  std::vector<RevisionRecord> out;
  detail::parse_lines(in, [&](const Json &j) {
    RevisionRecord r;
    r.revision_id = detail::opaque_string(j.at("revision_id"));
    r.content_hash = j.at("content_hash").get<std::string>();
    r.user_id = detail::opaque_string(j.contains("user_id") ? j.at("user_id") : j.at("user"));
    r.timestamp = j.at("timestamp").get<std::int64_t>();
    if (j.contains("user_flag") && !j["user_flag"].is_null())
      r.user_flag = j["user_flag"].get<std::string>();
    out.push_back(std::move(r));
  });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].timestamp < out[i - 1].timestamp)
      throw InvalidInput("revision timestamps decrease at line " + std::to_string(i + 1));
  return out;
}

inline std::vector<Transition> read_transitions(std::istream &in) {
  std::vector<Transition> out;
  detail::parse_lines(in, [&](const Json &j) {
    const auto dir = j.at("direction").get<std::string>();
    if (dir != "to_low" && dir != "to_high")
      throw InvalidInput("direction must be to_low or to_high");
    out.push_back({j.at("step").get<std::size_t>(),
                   dir == "to_low" ? Direction::to_low : Direction::to_high});
  });
  return out;
}

inline void write_transitions(std::ostream &out, const std::vector<Transition> &transitions) {
  for (const auto &t : transitions)
    out << Json{{"step", t.step}, {"direction", to_string(t.direction)}}.dump() << '\n';
}

/// Index of the edit whose timestamp is closest to `when` (ties go earlier).
inline std::size_t nearest_edit(const std::vector<std::int64_t> &timestamps, std::int64_t when) {
  if (timestamps.empty())
    throw InvalidInput("cannot resolve a timestamp against an untimed sequence");
  auto it = std::lower_bound(timestamps.begin(), timestamps.end(), when);
  if (it == timestamps.end())
    return timestamps.size() - 1;
  const auto idx = static_cast<std::size_t>(it - timestamps.begin());
  if (idx > 0 && when - timestamps[idx - 1] <= *it - when)
    return idx - 1;
  return idx;
}

/// Events carry either "position" or "timestamp"; timestamps are resolved to
/// the nearest edit of `seq`.
inline std::vector<Event> read_events(std::istream &in, const AnnotatedSequence *seq = nullptr) {
  std::vector<Event> out;
  detail::parse_lines(in, [&](const Json &j) {
    Event e{};
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("position")) {
      e.position = j["position"].get<std::size_t>();
    } else if (j.contains("timestamp")) {
      if (!seq || !seq->timestamps)
        throw InvalidInput("event has a timestamp but no timed sequence was given");
      e.position = nearest_edit(*seq->timestamps, j["timestamp"].get<std::int64_t>());
    } else {
      throw InvalidInput("event needs a position or a timestamp");
    }
    if (j.contains("payload"))
      for (const auto &[key, value] : j["payload"].items())
        e.payload[key] = value.is_string() ? value.get<std::string>() : value.dump();
    out.push_back(std::move(e));
  });
  if (seq)
    for (const auto &e : out)
      if (e.position >= seq->size())
        throw InvalidInput("event position " + std::to_string(e.position) +
                           " beyond sequence length");
  return out;
}

inline void write_events(std::ostream &out, const std::vector<Event> &events) {
  for (const auto &e : events) {
    Json j{{"position", e.position}, {"kind", to_string(e.kind)}};
    if (!e.payload.empty()) {
      Json p = Json::object();
      for (const auto &[k, v] : e.payload)
        p[k] = v;
      j["payload"] = std::move(p);
    }
    out << j.dump() << '\n';
  }
}

inline std::vector<UserBlockRecord> read_block_records(std::istream &in) {
  std::vector<UserBlockRecord> out;
  detail::parse_lines(in, [&](const Json &j) {
    UserBlockRecord r;
    r.user_id = detail::opaque_string(j.contains("user_id") ? j.at("user_id") : j.at("user"));
    r.total_edits = j.at("total_edits").get<std::size_t>();
    r.total_blocks = j.at("total_blocks").get<std::size_t>();
    if (r.total_edits < 1)
      throw InvalidInput("total_edits must be at least 1");
    out.push_back(std::move(r));
  });
  return out;
}

/// One article per line, either a bare integer or {"timestamp": ...}.
inline std::vector<std::int64_t> read_articles(std::istream &in) {
  std::vector<std::int64_t> out;
  detail::parse_lines(in, [&](const Json &j) {
    out.push_back(j.is_object() ? j.at("timestamp").get<std::int64_t>() : j.get<std::int64_t>());
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline Json to_json(const FitResult &r) {
  Json j;
  j["n_states"] = r.best_model.n_states();
  j["log_likelihood"] = number(r.best_log_likelihood);
  j["best_restart"] = r.best_restart;
  j["iterations_used"] = r.iterations_used;
  j["restart_log_likelihoods"] = Json::array();
  for (double ll : r.restart_log_likelihoods)
    j["restart_log_likelihoods"].push_back(number(ll));
  j["model"] = to_json(r.best_model);
  return j;
}

inline Json to_json(const SelectionReport &r, Criterion criterion) {
  Json j;
  j["criterion"] = criterion == Criterion::aic ? "aic" : "bic";
  j["chosen_n_states"] = criterion == Criterion::aic ? r.chosen_n_states_aic : r.chosen_n_states_bic;
  j["chosen_n_states_aic"] = r.chosen_n_states_aic;
  j["chosen_n_states_bic"] = r.chosen_n_states_bic;
  j["rows"] = Json::array();
  for (const auto &row : r.rows)
    j["rows"].push_back({{"n_states", row.n_states},
                         {"log_likelihood", number(row.log_likelihood)},
                         {"parameter_count", row.parameter_count},
                         {"aic", number(row.aic)},
                         {"bic", number(row.bic)}});
  return j;
}

inline Json complex_list(const std::vector<std::complex<double>> &values) {
  Json a = Json::array();
  for (const auto &v : values)
    a.push_back({number(v.real()), number(v.imag())});
  return a;
}

inline Json to_json(const SpectralSummary &s) {
  Json j;
  j["eigenvalues"] = complex_list(s.eigenvalues);
  j["lambda2"] = number(s.lambda2);
  j["lambda2_is_real"] = s.lambda2_is_real;
  j["lambda2_imag_magnitude"] = number(s.lambda2_imag_magnitude);
  j["relaxation_time"] = number(s.relaxation_time);
  j["decay_time"] = number(s.decay_time);
  j["stationary"] = Json::array();
  for (Eigen::Index i = 0; i < s.stationary.size(); ++i)
    j["stationary"].push_back(number(s.stationary(i)));
  j["second_vector"] = Json::array();
  for (Eigen::Index i = 0; i < s.second_vector.size(); ++i)
    j["second_vector"].push_back(number(s.second_vector(i)));
  j["subspace_labels"] = Json::array();
  for (auto l : s.subspace_labels)
    j["subspace_labels"].push_back(l == Subspace::one ? 1 : 2);
  return j;
}

inline Json to_json(const MixingBounds &b) {
  return {{"epsilon", number(b.epsilon)},
          {"pi_min", number(b.pi_min)},
          {"lower", number(b.lower)},
          {"upper", number(b.upper)}};
}

inline Json to_json(const NullTauReport &r) {
  Json nulls = Json::array();
  for (double t : r.null_taus)
    nulls.push_back(number(t));
  return {{"observed_tau", number(r.observed_tau)},
          {"p_value", number(r.p_value)},
          {"ratio_to_null_median", number(r.ratio_to_null_median)},
          {"null_taus", std::move(nulls)}};
}

inline Json to_json(const TrappingTimes &t) {
  return {{"mean_high", number(t.mean_high)},
          {"mean_low", number(t.mean_low)},
          {"overall", number(t.overall)}};
}

inline Json to_json(const EpochSegmentation &seg) {
  Json j;
  j["min_run"] = seg.min_run;
  j["n_steps"] = seg.step_labels.size();
  j["n_transitions"] = seg.transitions.size();
  j["trapping_time_high"] = number(seg.trapping_time_high);
  j["trapping_time_low"] = number(seg.trapping_time_low);
  j["runs"] = Json::array();
  for (const auto &r : seg.runs)
    j["runs"].push_back({{"start", r.start}, {"length", r.length}, {"label", to_string(r.label)}});
  if (seg.high_subspace)
    j["high_subspace"] = *seg.high_subspace == Subspace::one ? 1 : 2;
  j["state_subspaces"] = Json::array();
  for (auto s : seg.state_subspaces)
    j["state_subspaces"].push_back(s == Subspace::one ? 1 : 2);
  return j;
}

/// Rebuilds per-step labels from the run list written by to_json.
inline EpochSegmentation segmentation_from_json(const Json &j) {
  try {
    const auto min_run = j.at("min_run").get<std::size_t>();
    const auto n = j.at("n_steps").get<std::size_t>();
    std::vector<Conflict> labels;
    labels.reserve(n);
    for (const auto &r : j.at("runs")) {
      const auto label = r.at("label").get<std::string>();
      if (label != "high" && label != "low")
        throw InvalidInput("run label must be high or low");
      if (r.at("start").get<std::size_t>() != labels.size())
        throw InvalidInput("runs are not contiguous");
      labels.insert(labels.end(), r.at("length").get<std::size_t>(),
                    label == "high" ? Conflict::high : Conflict::low);
    }
    if (labels.size() != n || n == 0)
      throw InvalidInput("run lengths do not add up to n_steps");
    return segmentation_from_labels(std::move(labels), min_run);
  } catch (const Json::exception &e) {
    throw InvalidInput(std::string("malformed segmentation: ") + e.what());
  }
}

inline EpochSegmentation read_segmentation(std::istream &in) {
  try {
    return segmentation_from_json(Json::parse(in));
  } catch (const Json::parse_error &e) {
    throw InvalidInput(std::string("segmentation file is not JSON: ") + e.what());
  }
}

inline Json to_json(const RevertSummary &r) {
  return {{"fraction_high", number(r.fraction_high)},
          {"fraction_low", number(r.fraction_low)},
          {"ratio", number(r.ratio)},
          {"steps_high", r.steps_high},
          {"steps_low", r.steps_low}};
}

inline Json to_json(const SubspaceStats &s) {
  Json j;
  j["reverts"] = to_json(s.reverts);
  j["median_gap_high"] = number(s.median_gap_high);
  j["median_gap_low"] = number(s.median_gap_low);
  j["mean_gap_high"] = number(s.mean_gap_high);
  j["mean_gap_low"] = number(s.mean_gap_low);
  j["anon_fraction_high"] = number(s.anon_fraction_high);
  j["anon_fraction_low"] = number(s.anon_fraction_low);
  j["cr_filtered"] = {{"reverts", to_json(s.cr_filtered.reverts)},
                      {"pairs_removed", s.cr_filtered.pairs_removed},
                      {"empty_residue_high", s.cr_filtered.empty_residue_high},
                      {"empty_residue_low", s.cr_filtered.empty_residue_low}};
  return j;
}

inline Json to_json(const TurnoverReport &t) {
  return {{"transition_persistence", number(t.transition_persistence)},
          {"baseline_persistence", number(t.baseline_persistence)},
          {"transitions_used", t.transitions_used},
          {"skipped_transitions", t.skipped_transitions},
          {"baseline_points", t.baseline_points}};
}

inline Json to_json(const MotifTable &t) {
  Json j;
  j["motif_length"] = t.motif_length;
  j["windows_high"] = t.windows_high;
  j["windows_low"] = t.windows_low;
  j["smoothing_floor"] = number(t.smoothing_floor);
  j["top_high"] = t.rows[t.ranking_high.front()].pattern;
  j["top_low"] = t.rows[t.ranking_low.front()].pattern;
  j["rows"] = Json::array();
  for (const auto &r : t.rows)
    j["rows"].push_back({{"pattern", r.pattern},
                         {"count_high", r.count_high},
                         {"count_low", r.count_low},
                         {"p_high", number(r.p_high)},
                         {"q_low", number(r.q_low)},
                         {"mixture", number(r.mixture)},
                         {"partial_kl_high", number(r.partial_kl_high)},
                         {"partial_kl_low", number(r.partial_kl_low)}});
  return j;
}

inline void write_motif_csv(std::ostream &out, const MotifTable &t) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << "pattern,count_high,count_low,p_high,q_low,mixture,partial_kl_high,partial_kl_low,"
       "rank_high,rank_low\n";
  std::vector<std::size_t> rank_high(t.rows.size()), rank_low(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    rank_high[t.ranking_high[r]] = r + 1;
    rank_low[t.ranking_low[r]] = r + 1;
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto &r = t.rows[i];
    s << r.pattern << ',' << r.count_high << ',' << r.count_low << ',' << r.p_high << ','
      << r.q_low << ',' << r.mixture << ',' << r.partial_kl_high << ',' << r.partial_kl_low << ','
      << rank_high[i] << ',' << rank_low[i] << '\n';
  }
  out << s.str();
}

inline Json to_json(const AssociationReport &r) {
  Json j;
  j["kind"] = r.kind ? Json(to_string(*r.kind)) : Json(nullptr);
  j["window"] = r.window;
  j["n_events"] = r.n_events;
  j["n_events_associated"] = r.n_events_associated;
  j["effectiveness"] = number(r.effectiveness());
  j["n_transitions"] = r.n_transitions;
  j["n_transitions_associated"] = r.n_transitions_associated;
  j["explanatory_power"] = number(r.explanatory_power());
  j["null_expected_associated"] = number(r.null_expected_associated);
  j["null_expected_transitions_associated"] = number(r.null_expected_transitions_associated);
  j["p_value"] = number(r.p_value);
  j["p_value_transitions"] = number(r.p_value_transitions);
  j["valence_applicable"] = r.valence_applicable;
  j["valence_fraction"] = number(r.valence_fraction);
  return j;
}

inline Json to_json(const ValenceReport &v) {
  return {{"hard_pairs", v.hard_pairs},       {"hard_matches", v.hard_matches},
          {"hard_fraction", number(v.hard_fraction)}, {"soft_pairs", v.soft_pairs},
          {"soft_matches", v.soft_matches},   {"soft_fraction", number(v.soft_fraction)}};
}

inline Json to_json(const RecoveryTable &t) {
  Json j;
  j["trials"] = t.aic_choices.size();
  j["aic_choices"] = t.aic_choices;
  j["bic_choices"] = t.bic_choices;
  j["aic_mode"] = t.mode(Criterion::aic);
  j["bic_mode"] = t.mode(Criterion::bic);
  j["frequencies"] = Json::array();
  for (std::size_t n = t.range.lo; n <= t.range.hi; ++n)
    j["frequencies"].push_back({{"n_states", n},
                                {"aic", number(t.frequency(Criterion::aic, n))},
                                {"bic", number(t.frequency(Criterion::bic, n))}});
  return j;
}

inline Json error_json(const Error &e) {
  return {{"error", {{"kind", e.kind()}, {"message", e.what()}}}};
}

// ---------------------------------------------------------------------------
// File helpers

inline std::ifstream open_in(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidInput("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw InvalidInput("cannot write " + path);
  return out;
}

inline void write_json_file(const std::string &path, const Json &j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

} // namespace hmmepoch::io
