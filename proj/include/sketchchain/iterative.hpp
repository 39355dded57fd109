#pragma once

#include <cstdint>
#include <string>

#include "sketchchain/operators.hpp"
#include "sketchchain/solver.hpp"

namespace skch {

// Accelerated solve of M x = b through a relative preconditioner N with
// M <= N <= kappa M. The inner solver must carry accuracy <= 1/(10 kappa).
// Applications of M and of the inner solver are both bounded by
// ceil(4 sqrt(kappa) log(2/epsilon)); the bound is enforced structurally.
struct PagdConfig {
  double kappa = 1.0;
  double epsilon = 0.5;
  // Run the full application budget instead of exiting on the residual
  // certificate. The certificate is conservative by exit_safety.
  bool exact_cap = false;
  double exit_safety = 2.0;
  // Abort once the certificate is provably out of reach at the nominal rate
  // for the declared kappa. Grid searches enable this so a mispriced system
  // fails in a few iterations instead of paying the full budget.
  bool stall_check = false;

  void validate() const;
  Index max_iters() const;
};

struct PagdStats {
  Index iterations = 0;  // inner-solver applications; M applications match
  Index cap = 0;
  bool certified = false;  // left on the residual certificate
  double last_ratio = 0.0;  // certificate quantity / exit threshold at departure
};

// Process-wide tally backing the cap-compliance check: every run records its
// budget and whether the application counter stayed within it.
struct PagdGlobalStats {
  std::uint64_t invocations = 0;
  std::uint64_t cap_violations = 0;
};
PagdGlobalStats pagd_global_stats();
void reset_pagd_global_stats();

Vector pagd(const LinearOperator& m, const SolverHandle& precond, const PagdConfig& cfg,
            const Vector& b, PagdStats* stats = nullptr);

SolverHandle make_pagd_solver(OpPtr m, SolverHandle precond, PagdConfig cfg,
                              std::string target_desc);

// Rayleigh power ratio (x' M^{2q+1} x)/(x' M^{2q} x) for a Gaussian x, exact
// applications. Never exceeds the top eigenvalue; expected gap falls like
// log(d)/(q-1). q >= 2.
double power_method_exact(const LinearOperator& m, Index q, std::uint64_t seed);

// One normalized inexact power ratio through an approximate matvec. Exposed
// separately so trend checks can drive q directly.
double power_ratio_estimate(const MatvecHandle& f, Index q, std::uint64_t seed);

struct PowerConfig {
  double q_mult = 32.0;
  double trials_mult = 8.0;
  Index q_override = 0;       // > 0 replaces the computed q
  Index trials_override = 0;  // > 0 replaces the computed trial count
};

// Median-of-trials spectral-norm estimate: within factor 1+epsilon of ||M||
// with probability 1-delta. q = ceil(q_mult L(d)/epsilon), trials =
// ceil(trials_mult log(1/delta)), natural logs floored at 1.
double estimate_spectral_norm(const MatvecHandle& f, double epsilon, double delta,
                              std::uint64_t seed, const PowerConfig& cfg = {});

// Cheap certified upper bound: returns a value in [lambda_1, 2 lambda_1] with
// high probability (max of a few exact power ratios, doubled).
double spectral_upper_2approx(const LinearOperator& m, std::uint64_t seed);

// q-fold composition of an approximate matvec. If f is accurate to
// eps/(3 kappa)^{2q} for M, the composition is an eps-matvec for M^q.
MatvecHandle inexact_matvec_power(const MatvecHandle& f, Index q);

// Two-fold composition of a solver for PD A into a solver for A^2. Requires
// f accurate to epsilon/(9 kappa_a^2).
SolverHandle square_solver(const SolverHandle& f, double kappa_a, double epsilon);

}  // namespace skch
