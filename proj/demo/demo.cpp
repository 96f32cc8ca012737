// End-to-end walk through the library on the planted eight-state machine:
// generate, fit, analyze the spectrum, segment into epochs and rank motifs.

#include <hmmepoch.hpp>

#include <cstdio>

int main() {
  using namespace hmmepoch;

  const Hmm truth = planted_eight_state(1e-3);
  const auto data = generate(truth, 20000, 7);

  FitConfig cfg;
  cfg.restarts = kDeskRestarts;
  cfg.seed = 11;
  cfg.threads = 0;
  const auto fit = baum_welch(data.sequence, 8, cfg);
  std::printf("log-likelihood  fitted %.2f  truth %.2f\n", fit.best_log_likelihood,
              log_likelihood(truth, data.sequence));

  const auto truth_spec = spectral_summary(truth);
  const auto fit_spec = spectral_summary(fit.best_model);
  std::printf("relaxation time  truth %.1f  fitted %.1f\n", truth_spec.relaxation_time,
              fit_spec.relaxation_time);

  const auto seg = segment(fit.best_model, fit_spec, data.sequence);
  const auto trap = trapping_times(seg);
  std::printf("epochs %zu  transitions %zu  mean trapping time %.1f\n", seg.runs.size(),
              seg.transitions.size(), trap.overall.value_or(0.0));

  const auto stats = subspace_stats(seg, data.sequence);
  std::printf("revert fraction  high %.3f  low %.3f\n", stats.reverts.fraction_high.value_or(0.0),
              stats.reverts.fraction_low.value_or(0.0));

  const std::size_t lengths[] = {2};
  const auto motifs = motif_table(seg, data.sequence, lengths).front();
  std::printf("top length-2 motifs  high %s / %s  low %s / %s\n",
              motifs.top_high(0).pattern.c_str(),
              motifs.top_high(1).pattern.c_str(),
              motifs.top_low(0).pattern.c_str(),
              motifs.top_low(1).pattern.c_str());
  return 0;
}
