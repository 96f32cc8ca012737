// Command-line front end. Every subcommand reads and writes the file formats
// in hmmepoch/io.hpp; reports go to --report or stdout.

#include <CLI11.hpp>

#include <hmmepoch.hpp>

#include <functional>
#include <iostream>
#include <sstream>

namespace io = hmmepoch::io;
using hmmepoch::Error;
using io::Json;

namespace {

int exit_code(hmmepoch::ErrorCategory c) {
  switch (c) {
  case hmmepoch::ErrorCategory::usage:
    return 1;
  case hmmepoch::ErrorCategory::data:
    return 2;
  case hmmepoch::ErrorCategory::numerical:
    return 3;
  }
  return 3;
}

void emit(const std::string &path, const Json &j) {
  if (path.empty() || path == "-")
    std::cout << j.dump(2) << '\n';
  else
    io::write_json_file(path, j);
}

hmmepoch::AnnotatedSequence load_sequence(const std::string &path) {
  auto in = io::open_in(path);
  return io::read_sequence(in);
}

hmmepoch::Hmm load_model(const std::string &path) {
  auto in = io::open_in(path);
  return io::read_model(in);
}

hmmepoch::StateRange parse_range(const std::string &text) {
  const auto colon = text.find_first_of(":-");
  try {
    if (colon == std::string::npos) {
      const auto n = std::stoul(text);
      return {n, n};
    }
    return {std::stoul(text.substr(0, colon)), std::stoul(text.substr(colon + 1))};
  } catch (const std::exception &) {
    throw hmmepoch::UsageError("state range must look like LO:HI, got '" + text + "'");
  }
}

hmmepoch::Criterion parse_criterion(const std::string &name) {
  if (name == "aic")
    return hmmepoch::Criterion::aic;
  if (name == "bic")
    return hmmepoch::Criterion::bic;
  throw hmmepoch::UsageError("criterion must be aic or bic");
}

struct FitFlags {
  std::size_t restarts = hmmepoch::kDefaultRestarts;
  double tol = 1e-6;
  std::size_t max_iters = 1000;
  double pseudocount = 1e-6;

  void add(CLI::App *cmd) {
    cmd->add_option("--restarts", restarts, "EM restarts per state count")->capture_default_str();
    cmd->add_option("--tol", tol, "stop when log-likelihood gain falls below this")->capture_default_str();
    cmd->add_option("--max-iters", max_iters, "iteration cap per restart")->capture_default_str();
    cmd->add_option("--pseudocount", pseudocount, "added to expected counts each M-step")
        ->capture_default_str();
  }

  hmmepoch::FitConfig config(std::uint64_t seed, unsigned threads) const {
    hmmepoch::FitConfig c;
    c.restarts = restarts;
    c.tolerance = tol;
    c.max_iterations = max_iters;
    c.pseudocount = pseudocount;
    c.seed = seed;
    c.threads = threads;
    c.validate();
    return c;
  }
};

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Discrete HMM fitting, spectral epoch analysis and event association"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string report;
  app.add_option("--seed", seed, "seed for every random draw")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (0 = all cores); never changes results")
      ->capture_default_str();
  app.add_option("--report", report, "write the JSON report here instead of stdout");

  std::function<void()> action;

  // code
  auto *code = app.add_subcommand("code", "revision log -> C/R sequence");
  std::string revisions_path, sequence_out;
  code->add_option("--revisions", revisions_path, "revision log (JSON lines)")->required();
  code->add_option("--out", sequence_out, "sequence file to write")->required();
  code->callback([&] {
    action = [&] {
      auto in = io::open_in(revisions_path);
      const auto seq = hmmepoch::code_reverts(io::read_revisions(in));
      auto out = io::open_out(sequence_out);
      io::write_sequence(out, seq, 2);
      std::size_t reverts = 0;
      for (auto s : seq.symbols)
        reverts += s == hmmepoch::kRevert;
      emit(report, {{"edits", seq.size()}, {"reverts", reverts}});
    };
  });

  // fit
  auto *fit = app.add_subcommand("fit", "fit one state count or select over a range");
  std::string fit_sequence, model_out, criterion_name = "aic", state_range;
  std::size_t n_states = 0;
  FitFlags fit_flags;
  fit->add_option("--sequence", fit_sequence, "sequence file")->required();
  auto *states_opt = fit->add_option("--states", n_states, "number of hidden states");
  fit->add_option("--state-range", state_range, "LO:HI, selects by --criterion")->excludes(states_opt);
  fit->add_option("--criterion", criterion_name, "aic or bic")->capture_default_str();
  fit->add_option("--model-out", model_out, "write the chosen model here");
  fit_flags.add(fit);
  fit->callback([&] {
    action = [&] {
      if (!n_states && state_range.empty())
        throw hmmepoch::UsageError("fit needs --states or --state-range");
      const auto seq = load_sequence(fit_sequence);
      const auto cfg = fit_flags.config(seed, threads);
      const auto criterion = parse_criterion(criterion_name);
      Json j;
      hmmepoch::Hmm chosen = hmmepoch::coin(0.5);
      if (n_states) {
        const auto result = hmmepoch::baum_welch(seq, n_states, cfg);
        const std::size_t k = std::max<std::size_t>(2, seq.min_alphabet());
        const auto ic = hmmepoch::information_criteria(result.best_log_likelihood, n_states, k, seq.size());
        j = io::to_json(result);
        j["aic"] = io::number(ic.aic);
        j["bic"] = io::number(ic.bic);
        chosen = result.best_model;
      } else {
        const auto sel = hmmepoch::select_states(seq, parse_range(state_range), cfg);
        j = io::to_json(sel, criterion);
        chosen = sel.model_for(sel.chosen(criterion));
      }
      if (!model_out.empty()) {
        auto out = io::open_out(model_out);
        io::write_model(out, chosen);
      }
      emit(report, j);
    };
  });

  // spectral
  auto *spectral = app.add_subcommand("spectral", "eigen-analysis of a model's hidden chain");
  std::string spectral_model;
  double epsilon = 0.25;
  spectral->add_option("--model", spectral_model, "model file")->required();
  spectral->add_option("--epsilon", epsilon, "total-variation level for mixing bounds")
      ->capture_default_str();
  spectral->callback([&] {
    action = [&] {
      const auto hmm = load_model(spectral_model);
      const auto s = hmmepoch::spectral_summary(hmm);
      Json j = io::to_json(s);
      j["mixing_bounds"] = io::to_json(hmmepoch::mixing_bounds(s, epsilon));
      emit(report, j);
    };
  });

  // epochs
  auto *epochs = app.add_subcommand("epochs", "decode and segment into high/low conflict epochs");
  std::string epochs_model, epochs_sequence, segmentation_out, transitions_out;
  std::size_t min_run = hmmepoch::kDefaultMinRun, turnover_window = 100;
  epochs->add_option("--model", epochs_model, "model file")->required();
  epochs->add_option("--sequence", epochs_sequence, "sequence file")->required();
  epochs->add_option("--min-run", min_run, "shortest run kept by coarse-graining")->capture_default_str();
  epochs->add_option("--segmentation-out", segmentation_out, "segmentation JSON");
  epochs->add_option("--transitions-out", transitions_out, "transitions (JSON lines)");
  epochs->add_option("--turnover-window", turnover_window, "edits on each side for editor turnover")
      ->capture_default_str();
  epochs->callback([&] {
    action = [&] {
      const auto hmm = load_model(epochs_model);
      const auto seq = load_sequence(epochs_sequence);
      seq.validate_against(hmm.alphabet_size());
      const auto summary = hmmepoch::spectral_summary(hmm);
      const auto seg = hmmepoch::segment(hmm, summary, seq, min_run);
      Json j;
      j["segmentation"] = io::to_json(seg);
      j["trapping_times"] = io::to_json(hmmepoch::trapping_times(seg));
      j["trapping_times_uncensored"] = io::to_json(hmmepoch::trapping_times(seg, false));
      j["subspace_stats"] = io::to_json(hmmepoch::subspace_stats(seg, seq));
      if (seq.user_ids)
        j["turnover"] = io::to_json(hmmepoch::turnover(seg, seq, turnover_window, seed));
      if (!segmentation_out.empty())
        io::write_json_file(segmentation_out, io::to_json(seg));
      if (!transitions_out.empty()) {
        auto out = io::open_out(transitions_out);
        io::write_transitions(out, seg.transitions);
      }
      emit(report, j);
    };
  });

  // motifs
  auto *motifs = app.add_subcommand("motifs", "motif divergence tables per epoch type");
  std::string motif_segmentation, motif_sequence, csv_prefix;
  std::vector<std::size_t> lengths{2, 3, 4, 5};
  motifs->add_option("--segmentation", motif_segmentation, "segmentation JSON from epochs")->required();
  motifs->add_option("--sequence", motif_sequence, "sequence file")->required();
  motifs->add_option("--lengths", lengths, "motif lengths")->capture_default_str();
  motifs->add_option("--csv-prefix", csv_prefix, "also write PREFIX<length>.csv per table");
  motifs->callback([&] {
    action = [&] {
      auto in = io::open_in(motif_segmentation);
      const auto seg = io::read_segmentation(in);
      const auto seq = load_sequence(motif_sequence);
      const auto tables = hmmepoch::motif_table(seg, seq, lengths);
      Json j = Json::array();
      for (const auto &t : tables) {
        j.push_back(io::to_json(t));
        if (!csv_prefix.empty()) {
          auto out = io::open_out(csv_prefix + std::to_string(t.motif_length) + ".csv");
          io::write_motif_csv(out, t);
        }
      }
      emit(report, j);
    };
  });

  // null
  auto *null = app.add_subcommand("null", "relaxation time against row-shuffled nulls");
  std::string null_model;
  std::size_t null_replicates = 1000;
  null->add_option("--model", null_model, "model file")->required();
  null->add_option("--replicates", null_replicates, "null replicates")->capture_default_str();
  null->callback([&] {
    action = [&] {
      const auto hmm = load_model(null_model);
      emit(report, io::to_json(hmmepoch::null_tau(hmm, null_replicates, seed, threads)));
    };
  });

  // associate
  auto *assoc = app.add_subcommand("associate", "windowed event/transition association");
  std::string assoc_transitions, assoc_events, assoc_sequence;
  std::size_t assoc_steps = 0, window = 10, assoc_replicates = 1000;
  bool with_valence = false;
  assoc->add_option("--transitions", assoc_transitions, "transitions file")->required();
  assoc->add_option("--events", assoc_events, "events file")->required();
  auto *seq_opt = assoc->add_option("--sequence", assoc_sequence, "sequence (length, timestamps)");
  assoc->add_option("--n-steps", assoc_steps, "sequence length when no sequence is given")
      ->excludes(seq_opt);
  assoc->add_option("--window", window, "association window in edits")->capture_default_str();
  assoc->add_option("--replicates", assoc_replicates, "null replicates")->capture_default_str();
  assoc->add_flag("--valence", with_valence, "also score protection valence");
  assoc->callback([&] {
    action = [&] {
      std::optional<hmmepoch::AnnotatedSequence> seq;
      if (!assoc_sequence.empty()) {
        seq = load_sequence(assoc_sequence);
        assoc_steps = seq->size();
      }
      if (!assoc_steps)
        throw hmmepoch::UsageError("associate needs --sequence or --n-steps");
      auto tin = io::open_in(assoc_transitions);
      const auto transitions = io::read_transitions(tin);
      auto ein = io::open_in(assoc_events);
      const auto events = io::read_events(ein, seq ? &*seq : nullptr);
      hmmepoch::AssociateConfig cfg{window, assoc_replicates, seed, threads};
      Json j = io::to_json(hmmepoch::associate(transitions, events, assoc_steps, cfg));
      if (with_valence)
        j["valence"] = io::to_json(hmmepoch::valence(transitions, events, window));
      emit(report, j);
    };
  });

  // generate
  auto *gen = app.add_subcommand("generate", "sample a sequence from a model");
  std::string gen_model, gen_out, gen_path;
  std::size_t gen_length = 0;
  gen->add_option("--model", gen_model, "model file")->required();
  gen->add_option("--length", gen_length, "number of symbols")->required();
  gen->add_option("--out", gen_out, "sequence file to write")->required();
  gen->add_option("--path-out", gen_path, "also write the hidden state path");
  gen->callback([&] {
    action = [&] {
      const auto hmm = load_model(gen_model);
      if (gen_length < 1)
        throw hmmepoch::UsageError("length must be at least 1");
      const auto g = hmmepoch::generate(hmm, gen_length, seed);
      auto out = io::open_out(gen_out);
      io::write_sequence(out, g.sequence, hmm.alphabet_size());
      if (!gen_path.empty()) {
        auto pout = io::open_out(gen_path);
        io::write_path(pout, g.path.states);
      }
      emit(report, {{"length", gen_length}, {"seed", seed}});
    };
  });

  // recover
  auto *recover = app.add_subcommand("recover", "state-count recovery on data from a known model");
  std::string recover_model, recover_range = "1:10";
  std::size_t trials = 24, recover_length = 10731;
  FitFlags recover_flags;
  recover_flags.restarts = hmmepoch::kDeskRestarts;
  recover->add_option("--model", recover_model, "truth model file")->required();
  recover->add_option("--trials", trials, "independent sequences")->capture_default_str();
  recover->add_option("--state-range", recover_range, "LO:HI")->capture_default_str();
  recover->add_option("--length", recover_length, "symbols per trial")->capture_default_str();
  recover_flags.add(recover);
  recover->callback([&] {
    action = [&] {
      const auto truth = load_model(recover_model);
      const auto table = hmmepoch::recovery_experiment(truth, trials, parse_range(recover_range),
                                                       recover_flags.config(seed, threads),
                                                       recover_length);
      emit(report, io::to_json(table));
    };
  });

  // antisocial
  auto *anti = app.add_subcommand("antisocial", "transitions dominated by frequently blocked editors");
  std::string anti_sequence, anti_blocks, anti_transitions, anti_events_out;
  hmmepoch::AntiSocialConfig anti_cfg;
  std::size_t anti_replicates = 1000;
  anti->add_option("--sequence", anti_sequence, "sequence with user ids")->required();
  anti->add_option("--blocks", anti_blocks, "block records (JSON lines)")->required();
  anti->add_option("--transitions", anti_transitions, "transitions file")->required();
  anti->add_option("--window", anti_cfg.window, "edits on each side of a transition")
      ->capture_default_str();
  anti->add_option("--percentile", anti_cfg.percentile, "blocking-rate percentile")->capture_default_str();
  anti->add_option("--sample-size", anti_cfg.sample_size, "editors sampled with replacement")
      ->capture_default_str();
  anti->add_option("--replicates", anti_replicates, "null replicates")->capture_default_str();
  anti->add_option("--events-out", anti_events_out, "write flagged transitions as events");
  anti->callback([&] {
    action = [&] {
      anti_cfg.seed = seed;
      const auto seq = load_sequence(anti_sequence);
      auto bin = io::open_in(anti_blocks);
      const auto records = io::read_block_records(bin);
      auto tin = io::open_in(anti_transitions);
      const auto transitions = io::read_transitions(tin);
      if (!anti_events_out.empty()) {
        auto out = io::open_out(anti_events_out);
        io::write_events(out, hmmepoch::anti_social_flags(seq, records, transitions, anti_cfg));
      }
      Json j = io::to_json(
          hmmepoch::anti_social_association(seq, records, transitions, anti_cfg, anti_replicates));
      j["threshold"] = io::number(hmmepoch::blocking_threshold(seq, records, anti_cfg));
      emit(report, j);
    };
  });

  // news
  auto *news = app.add_subcommand("news", "news-spike events from article timestamps");
  std::string news_articles, news_sequence, news_out;
  double confidence = 0.95;
  news->add_option("--articles", news_articles, "article timestamps (JSON lines)")->required();
  news->add_option("--sequence", news_sequence, "timed sequence")->required();
  news->add_option("--confidence", confidence, "one-sided Poisson level")->capture_default_str();
  news->add_option("--events-out", news_out, "events file to write")->required();
  news->callback([&] {
    action = [&] {
      const auto seq = load_sequence(news_sequence);
      auto ain = io::open_in(news_articles);
      const auto scan = hmmepoch::news_scan(io::read_articles(ain), seq, confidence);
      auto out = io::open_out(news_out);
      io::write_events(out, scan.events);
      emit(report, {{"baseline_per_day", io::number(scan.baseline_per_day)},
                    {"spikes", scan.events.size()},
                    {"peak_days", scan.peak_days}});
    };
  });

  // planted
  auto *planted = app.add_subcommand("planted", "write a built-in ground-truth model");
  std::string planted_kind = "eight", planted_out;
  double bridge = 1e-3, p_revert = 0.5;
  planted->add_option("--kind", planted_kind, "eight, four, symmetric or coin")->capture_default_str();
  planted->add_option("--bridge", bridge, "between-module (or switching) probability")
      ->capture_default_str();
  planted->add_option("--p-revert", p_revert, "revert probability for --kind coin")->capture_default_str();
  planted->add_option("--out", planted_out, "model file to write")->required();
  planted->callback([&] {
    action = [&] {
      hmmepoch::Hmm hmm = hmmepoch::coin(p_revert);
      if (planted_kind == "eight")
        hmm = hmmepoch::planted_eight_state(bridge);
      else if (planted_kind == "four")
        hmm = hmmepoch::planted_four_state(bridge);
      else if (planted_kind == "symmetric")
        hmm = hmmepoch::symmetric_two_state(bridge);
      else if (planted_kind != "coin")
        throw hmmepoch::UsageError("unknown planted model '" + planted_kind + "'");
      auto out = io::open_out(planted_out);
      io::write_model(out, hmm);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << Json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }

  try {
    action();
    return 0;
  } catch (const Error &e) {
    std::cerr << io::error_json(e).dump() << '\n';
    return exit_code(e.category());
  } catch (const std::bad_alloc &) {
    std::cerr << Json{{"error", {{"kind", "numerical"}, {"message", "out of memory"}}}}.dump() << '\n';
    return 3;
  } catch (const std::exception &e) {
    std::cerr << Json{{"error", {{"kind", "invalid_input"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }
}
