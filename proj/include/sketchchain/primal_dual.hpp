#pragma once

#include <cstdint>
#include <vector>

#include "sketchchain/iterative.hpp"
#include "sketchchain/sketching.hpp"
#include "sketchchain/solver.hpp"
#include "sketchchain/trace.hpp"

namespace skch {

// One alternating level. Both blocks carry the same left sketch; b reuses the
// previous level's right sketch, which is what keeps consecutive Grams
// comparable. The records allow bit-identical regeneration of the sketches.
struct PdLevel {
  DenseMatrix a;  // s_t x d_t
  DenseMatrix b;  // s_t x d_{t-1}
  double nu = 0.0;
  SparseEmbedding::Record left;   // S_t
  SparseEmbedding::Record right;  // Pi_t
};

// Alternating chain. validate() enforces the structural part only:
// interlocking shapes and a positive, non-decreasing ridge schedule. The
// spectral part (each bridged Gram pair within factor 4 at its ridge, and
// the dual pairs likewise) is certified statistically at build time and can
// be re-checked by spectral_tester, never assumed here.
struct PrimalDualChain {
  OpPtr head;  // A_0
  double nu0 = 0.0;
  std::vector<PdLevel> levels;

  Index dim() const;
  Index depth() const { return static_cast<Index>(levels.size()); }
  void validate() const;
};

// Solver for B'B + nu I assembled from a solver for A'A + nu I, for a pair
// sharing rows whose duals match: A A' + nu I within factor 4 of
// B B' + nu I. kappa must dominate 1 + ||A||^2/nu. Two Woodbury conversions
// around one accelerated solve of the bridged dual Gram at condition 16;
// the first conversion pins f at accuracy 1/(160 kappa^2), and f is applied
// at most ceil(16 log(2/eps_h)) times per call, eps_h = epsilon/(16 kappa^2).
SolverHandle dual_reduction(const OpPtr& a, const OpPtr& b, double nu, double kappa,
                            SolverHandle f, double epsilon, WorkPtr work = nullptr,
                            bool exact_cap = false);

struct PdSolveOptions {
  bool exact_cap = false;
  // Filled with the per-level solvers in descent order (level T-1 first, the
  // returned head solver last) when non-null.
  std::vector<SolverHandle>* level_solvers = nullptr;
};

// Descends the chain, crossing each dimension change with dual_reduction at
// accuracy nu_{t-1}/(160 nu_t) and each ridge gap with an accelerated solve
// at condition 16 nu_t/nu_{t-1}. kappa is the chain surrogate
// max_t (||B_t||^2 + nu_{t-1})/nu_t; certified per-level norm bounds raise
// it internally where the conversions need more, and the raised value sets
// the interior accuracy floor 1/(160 kappa^2) that bsolve must meet.
SolverHandle pd_chain_solve(const PrimalDualChain& chain, SolverHandle bsolve,
                            double epsilon, double kappa, WorkPtr work = nullptr,
                            const PdSolveOptions& opts = {});

struct TesterConfig {
  double eps_pow = 1.0 / 3.0;      // norm estimates land within factor 4/3
  double delta = 0.01;
  double threshold = 3.0;
  double accuracy_exponent = 6.0;  // solver accuracy d^-exponent, floored at 1/640
  PowerConfig power;               // fidelity overrides for the norm estimates
  SolverHandle counterpart;        // optional pre-built solver for B'B + nu I
};

struct TesterVerdict {
  int x = 0;           // 1 certifies the factor-4 match, 0 a factor-2 violation
  double a_hat = 0.0;  // estimated norm of the A-side lifted form
  double b_hat = 0.0;  // estimated norm of the B-side lifted form
};

// Randomized comparison of A'A + nu I and B'B + nu I for a pair sharing
// column dimension, valid when the two are already within factor 8. f solves
// the A side at accuracy min(d^-exponent, 1/640); the B-side solver is
// derived from f across the factor-8 window unless supplied. Both lifted
// quadratic forms are estimated by the power method over inexact matvecs and
// compared against the threshold.
TesterVerdict spectral_tester(const DenseMatrix& a, const DenseMatrix& b, double nu,
                              const SolverHandle& f, std::uint64_t seed,
                              WorkPtr work = nullptr, const TesterConfig& cfg = {});

// Rank schedule k_t = max(ceil(d exp(-alpha t^2)), 2k) for t = 1..T with
// T = ceil(sqrt(log(d/(2k))/alpha)), floored at one level. The last rank is
// always 2k, which is what makes the base level dense-factorable.
struct PdSchedule {
  Index depth = 0;
  std::vector<Index> ranks;
};
PdSchedule pd_schedule(Index d, Index k, double alpha);

struct PdBuildOptions {
  double eps_s = 0.1;    // left sketch distortion, OSE rank 2 k_t
  double eps_pi = 0.25;  // right sketch distortion, OSE rank s_t
  double c_s = 4.0;
  double c_b = 2.0;
  TesterConfig tester;      // fidelity profile for the ridge search
  Index candidate_cap = 0;  // halving steps per level; 0: ceil(log2(nu_T/nu_0)) + 1
  TraceSink trace;
};

struct PdBuildReport {
  double kappa_hat = 0.0;  // certified surrogate max_t (||B_t||^2 + nu_{t-1})/nu_t
  Index tester_calls = 0;
  std::vector<double> accepted_nu;          // nu_1 .. nu_T
  std::vector<Index> candidates_per_level;  // halving steps taken at t = 1..T
};

// Sketches the alternating chain at the pd_schedule ranks and locates each
// interior ridge by halving down from nu_T = 4 tail_mean_hint until the
// tester rejects, keeping the last accepted candidate; a search that walks
// below the head ridge settles on the head ridge itself. tail_mean_hint and
// sigma_floor_hint are factor-2 estimates of the rank-2k tail mean and of
// sigma_d^2. Each tester call is powered by a temporarily extended chain, so
// nothing larger than the base level is ever factored densely.
PrimalDualChain build_primal_dual_chain(const DenseMatrix& a, Index k, double alpha,
                                        double tail_mean_hint, double sigma_floor_hint,
                                        double delta, std::uint64_t seed,
                                        WorkPtr work = nullptr,
                                        const PdBuildOptions& opts = {},
                                        PdBuildReport* report = nullptr);

// Build profile the regression driver uses for its grid candidates. The
// stock PdBuildOptions sizes degenerate to identity sketches until n is in
// the tens of thousands; the driver instead runs factor-2 embeddings with
// thin columns so the base level is genuinely O(k)-sized at bench dims.
inline PdBuildOptions regression_build_profile() {
  PdBuildOptions o;
  o.eps_s = 1.0;
  o.eps_pi = 1.0;
  o.c_s = 1.0;
  o.c_b = 0.05;
  return o;
}

struct RegressionOptions {
  double delta = 0.05;
  double kappa_cap = 0.0;             // condition-surrogate cap; 0: min(4 d^2, 262144)
  std::int64_t grid_work_budget = 0;  // grid mac budget; 0: unbounded
  // Per-candidate mac allowance, in units of (n+d)*d*log(2/eps_outer), scaled
  // by the round's condition guess. Candidates that exceed it abort as
  // uncertified; the doubling rounds relax it. 0 disables the cap.
  double pair_work_factor = 96.0;
  PdBuildOptions build = regression_build_profile();
};

struct RegressionReport {
  double kappa_tilde = 0.0;
  double sigma_floor = 0.0;  // accepted head ridge anchor
  double tail_mean = 0.0;    // accepted tail-mass anchor
  Index grid_candidates = 0;
  Index retries = 0;
  Index chain_depth = 0;
  bool certified = false;
};

// Least-squares driver. Doubling grid over a condition surrogate and the two
// ridge anchors, alternating chain build per candidate, recursive solve
// base-cased by a dense factorization of the base level, then an accelerated
// outer loop against A'A itself at accuracy epsilon^2 (the residual contract
// squares). Candidates run cheapest first under a shared deadline and a
// per-candidate allowance; the first certificate wins outright (it already
// witnesses the contract), and the best uncertified candidate is retried once
// at a widened condition before the grid gives up.
Vector regression_solve(const DenseMatrix& a, const Vector& b, Index k, double epsilon,
                        std::uint64_t seed, WorkPtr work = nullptr,
                        const RegressionOptions& opts = {},
                        RegressionReport* report = nullptr);

}  // namespace skch
