#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

using namespace hmmepoch;

namespace {

Hmm coin_model(double p_r) { return coin(p_r); }

Hmm deterministic_two_state() {
  Matrix a(2, 2);
  a << 0.6, 0.4, 0.3, 0.7;
  Matrix b(2, 2);
  b << 1.0, 0.0, 0.0, 1.0;
  return Hmm(Vector::Constant(2, 0.5), a, b);
}

} // namespace

TEST(LogLikelihood, CertainSequenceIsZero) {
  EXPECT_DOUBLE_EQ(log_likelihood(coin_model(0.0), from_cr_string("CCC")), 0.0);
}

TEST(LogLikelihood, FairCoin) {
  EXPECT_NEAR(log_likelihood(coin_model(0.5), from_cr_string("CRCRRCCRCR")), 10 * std::log(0.5),
              1e-12);
}

TEST(LogLikelihood, ImpossibleSequenceIsNegativeInfinity) {
  const double ll = log_likelihood(coin_model(0.0), from_cr_string("CCR"));
  EXPECT_TRUE(std::isinf(ll) && ll < 0);
}

TEST(LogLikelihood, RejectsEmptyAndOutOfAlphabet) {
  EXPECT_THROW(log_likelihood(coin_model(0.5), AnnotatedSequence{}), InvalidInput);
  EXPECT_THROW(log_likelihood(coin_model(0.5), AnnotatedSequence({0, 2})), InvalidInput);
}

TEST(LogLikelihood, MatchesPathEnumeration) {
  std::mt19937_64 gen(1234);
  for (int trial = 0; trial < 10; ++trial) {
    const auto hmm = oracle::random_hmm(3, 2, gen);
    for (std::size_t len : {1u, 4u, 8u}) {
      for (const auto &obs : oracle::all_sequences(2, len)) {
        const auto e = oracle::enumerate_paths(hmm, obs);
        EXPECT_NEAR(log_likelihood(hmm, AnnotatedSequence(obs)), std::log(e.likelihood), 1e-9);
      }
    }
  }
}

TEST(LogLikelihood, LongSequenceStaysFinite) {
  const auto hmm = planted_eight_state();
  const auto g = generate(hmm, 45000, 3);
  const double ll = log_likelihood(hmm, g.sequence);
  EXPECT_TRUE(std::isfinite(ll));
  EXPECT_LT(ll, 0.0);
}

TEST(Viterbi, DeterministicEmissionsForceThePath) {
  const auto p = viterbi(deterministic_two_state(), from_cr_string("CRRC"));
  EXPECT_EQ(p.states, (std::vector<StateIndex>{0, 1, 1, 0}));
}

TEST(Viterbi, SingleStateGivesZeroPath) {
  const auto p = viterbi(coin_model(0.3), from_cr_string("CRRCR"));
  EXPECT_EQ(p.states, std::vector<StateIndex>(5, 0));
}

TEST(Viterbi, TiesGoToLowestStateIndex) {
  Matrix a(2, 2);
  a << 0.5, 0.5, 0.5, 0.5;
  Matrix b(2, 2);
  b << 0.5, 0.5, 0.5, 0.5;
  const Hmm h(Vector::Constant(2, 0.5), a, b);
  const auto p = viterbi(h, from_cr_string("CRC"));
  EXPECT_EQ(p.states, std::vector<StateIndex>(3, 0));
}

TEST(Viterbi, ImpossibleSequenceNamesPosition) {
  try {
    viterbi(coin_model(0.0), from_cr_string("CCRC"));
    FAIL() << "expected a decode failure";
  } catch (const DecodeFailure &e) {
    EXPECT_EQ(e.position(), 2u);
  }
}

TEST(Viterbi, MatchesPathEnumeration) {
  std::mt19937_64 gen(4321);
  for (int trial = 0; trial < 10; ++trial) {
    const auto hmm = oracle::random_hmm(3, 2, gen, 0.2);
    for (const auto &obs : oracle::all_sequences(2, 6)) {
      const auto e = oracle::enumerate_paths(hmm, obs);
      if (e.best <= 0.0) {
        EXPECT_THROW(viterbi(hmm, AnnotatedSequence(obs)), DecodeFailure);
        continue;
      }
      const auto p = viterbi(hmm, AnnotatedSequence(obs));
      EXPECT_NEAR(p.log_likelihood, std::log(e.best), 1e-9);
      EXPECT_NEAR(path_log_probability(hmm, AnnotatedSequence(obs), p.states), std::log(e.best), 1e-9);
      if (e.best - e.runner_up > 1e-12 * e.best) {
        EXPECT_EQ(p.states, e.best_path);
      }
    }
  }
}

TEST(Viterbi, NeverExceedsMarginal) {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto hmm = oracle::random_hmm(4, 3, gen);
    const auto g = generate(hmm, 300, static_cast<std::uint64_t>(trial));
    EXPECT_LE(viterbi(hmm, g.sequence).log_likelihood, log_likelihood(hmm, g.sequence) + 1e-9);
  }
}

TEST(Generate, DeterministicCycle) {
  Matrix a(2, 2);
  a << 0.0, 1.0, 1.0, 0.0;
  Matrix b(2, 2);
  b << 1.0, 0.0, 0.0, 1.0;
  Vector pi(2);
  pi << 1.0, 0.0;
  const auto g = generate(Hmm(pi, a, b), 6, 42);
  EXPECT_EQ(to_cr_string(g.sequence.symbols), "CRCRCR");
  EXPECT_EQ(g.path.states, (std::vector<StateIndex>{0, 1, 0, 1, 0, 1}));
}

TEST(Generate, SameSeedSameOutput) {
  const auto hmm = planted_four_state();
  const auto a = generate(hmm, 1000, 17), b = generate(hmm, 1000, 17), c = generate(hmm, 1000, 18);
  EXPECT_EQ(a.sequence.symbols, b.sequence.symbols);
  EXPECT_EQ(a.path.states, b.path.states);
  EXPECT_NE(a.sequence.symbols, c.sequence.symbols);
}

TEST(Generate, SymbolFrequencyMatchesStationaryEmission) {
  Matrix a(2, 2);
  a << 0.9, 0.1, 0.3, 0.7;
  Matrix b(2, 2);
  b << 0.8, 0.2, 0.25, 0.75;
  const Hmm hmm(Vector::Constant(2, 0.5), a, b);
  const auto pi = spectral_summary(hmm).stationary;
  const double p_r = pi(0) * 0.2 + pi(1) * 0.75;
  const std::size_t n = 100000;
  const auto g = generate(hmm, n, 2024);
  const double freq =
      static_cast<double>(std::count(g.sequence.symbols.begin(), g.sequence.symbols.end(), kRevert)) /
      static_cast<double>(n);
  // Correlated draws inflate the binomial error; the chain's integrated
  // autocorrelation factor here is (1 + l2) / (1 - l2) with l2 = 0.6.
  const double se = std::sqrt(p_r * (1 - p_r) / n * (1.6 / 0.4));
  EXPECT_NEAR(freq, p_r, 3 * se);
}

TEST(Generate, PerSymbolLikelihoodConvergesToEntropyRate) {
  const auto hmm = planted_four_state(0.01);
  const std::size_t n = 100000;
  double reference = 0.0;
  const int reps = 4;
  for (int r = 0; r < reps; ++r) {
    const auto g = generate(hmm, n, 1000 + static_cast<std::uint64_t>(r));
    reference += log_likelihood(hmm, g.sequence) / static_cast<double>(n);
  }
  reference /= reps;
  const auto g = generate(hmm, n, 7);
  EXPECT_NEAR(log_likelihood(hmm, g.sequence) / static_cast<double>(n), reference, 0.01);
}
