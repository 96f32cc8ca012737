#pragma once

// Known-structure machines used as ground truth by tests, the acceptance
// suite, and `hmmepoch planted`.

#include <cstdint>

#include "hmm.hpp"
#include "random.hpp"

namespace hmmepoch {

/// One block of a modular machine: within-block transitions (rows stochastic)
/// and emissions.
struct Module {
  Matrix transition;
  Matrix emission;
};

/// Joins two modules. Every state leaves its module with total probability
/// `bridge`, spread evenly over the other module's states. Initial
/// distribution is uniform.
inline Hmm join_modules(const Module &first, const Module &second, double bridge) {
  const Eigen::Index na = first.transition.rows(), nb = second.transition.rows();
  const Eigen::Index n = na + nb;
  if (first.emission.cols() != second.emission.cols())
    throw InvalidInput("modules use different alphabets");
  if (!(bridge >= 0.0 && bridge < 1.0))
    throw InvalidInput("bridge probability must lie in [0, 1)");
  Matrix a = Matrix::Zero(n, n);
  a.topLeftCorner(na, na) = first.transition * (1.0 - bridge);
  a.bottomRightCorner(nb, nb) = second.transition * (1.0 - bridge);
  a.topRightCorner(na, nb).setConstant(bridge / static_cast<double>(nb));
  a.bottomLeftCorner(nb, na).setConstant(bridge / static_cast<double>(na));
  Matrix b(n, first.emission.cols());
  b << first.emission, second.emission;
  return Hmm(Vector::Constant(n, 1.0 / static_cast<double>(n)), std::move(a), std::move(b));
}

/// Module whose states mostly alternate C and R ("CRCR...", vandal-repair
/// style). State 3 is reached only from the lingering state 2 and returns to
/// either state, so it carries history the other states do not.
inline Module alternating_module() {
  Module m;
  m.transition.resize(4, 4);
  m.emission.resize(4, 2);
  // 0: C, 1: R, 2: lingering C, 3: R after lingering
  m.transition << 0.00, 0.90, 0.10, 0.00,
                  0.85, 0.00, 0.15, 0.00,
                  0.00, 0.00, 0.70, 0.30,
                  0.40, 0.00, 0.60, 0.00;
  m.emission << 0.99, 0.01,
                0.01, 0.99,
                0.99, 0.01,
                0.01, 0.99;
  return m;
}

/// Module dominated by long runs of C and of R ("CCCC...RRRR...").
inline Module run_module() {
  Module m;
  m.transition.resize(4, 4);
  m.emission.resize(4, 2);
  // 0: long C run, 1: R run, 2: short C run, 3: short R run
  m.transition << 0.95, 0.05, 0.00, 0.00,
                  0.00, 0.85, 0.15, 0.00,
                  0.00, 0.00, 0.60, 0.40,
                  0.50, 0.00, 0.00, 0.50;
  m.emission << 0.99, 0.01,
                0.01, 0.99,
                0.99, 0.01,
                0.01, 0.99;
  return m;
}

/// Eight-state two-module machine: states 0-3 alternation, 4-7 runs.
inline Hmm planted_eight_state(double bridge = 1e-3) {
  return join_modules(alternating_module(), run_module(), bridge);
}

/// Two states per module, each emitting one symbol almost deterministically.
inline Hmm planted_four_state(double bridge = 1e-3) {
  Module hi, lo;
  hi.transition.resize(2, 2);
  hi.emission.resize(2, 2);
  hi.transition << 0.1, 0.9, 0.9, 0.1;
  hi.emission << 0.95, 0.05, 0.05, 0.95;
  lo.transition.resize(2, 2);
  lo.emission.resize(2, 2);
  lo.transition << 0.9, 0.1, 0.2, 0.8;
  lo.emission << 0.95, 0.05, 0.05, 0.95;
  return join_modules(hi, lo, bridge);
}

/// Module with uniformly random stochastic rows, each entry bounded away from
/// zero so the block mixes quickly.
inline Module random_module(std::size_t size, std::size_t alphabet, Rng &rng) {
  Module m{Matrix(size, size), Matrix(size, alphabet)};
  auto fill = [&](Matrix &mat) {
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
      double total = 0.0;
      for (Eigen::Index j = 0; j < mat.cols(); ++j) {
        mat(i, j) = 0.2 + rng.uniform();
        total += mat(i, j);
      }
      mat.row(i) /= total;
    }
  };
  fill(m.transition);
  fill(m.emission);
  return m;
}

/// Symmetric two-state chain switching with probability p; emissions are
/// deterministic (state 0 -> C, state 1 -> R).
inline Hmm symmetric_two_state(double p) {
  Matrix a(2, 2);
  a << 1.0 - p, p, p, 1.0 - p;
  Matrix b(2, 2);
  b << 1.0, 0.0, 0.0, 1.0;
  return Hmm(Vector::Constant(2, 0.5), std::move(a), std::move(b));
}

/// Single-state i.i.d. coin with P(R) = p_revert.
inline Hmm coin(double p_revert) {
  Matrix a(1, 1);
  a << 1.0;
  Matrix b(1, 2);
  b << 1.0 - p_revert, p_revert;
  return Hmm(Vector::Ones(1), std::move(a), std::move(b));
}

} // namespace hmmepoch
