#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchchain/operators.hpp"
#include "sketchchain/sketching.hpp"
#include "sketchchain/solver.hpp"

namespace skch {

// One rung of a preconditioning chain: M_{t-1} <= M_t <= kappa_t M_{t-1}.
struct PreconLevel {
  OpPtr m;
  double kappa = 1.0;
};

struct PreconChain {
  OpPtr m0;
  std::vector<PreconLevel> levels;  // levels[t-1] holds (M_t, kappa_t)

  Index dim() const;
  Index depth() const { return static_cast<Index>(levels.size()); }
  void validate() const;
};

struct RpagdOptions {
  bool exact_cap = false;
  double exit_safety = 2.0;
  // When set, receives the solver handle built at each level (index t-1
  // solves M_{t-1}), so per-level call counters stay observable.
  std::vector<SolverHandle>* level_solvers = nullptr;
};

// Application budget of the solve at each level: entry t-1 bounds how often
// the level-t solver is applied per call of the level-(t-1) solver. The head
// entry uses the requested accuracy; deeper entries use 1/(10 kappa_{t-1}).
// The product of all entries bounds total base-solver invocations per call.
std::vector<Index> rpagd_caps(const PreconChain& chain, double epsilon);

// Recursive preconditioned solve of M_0: level t is an accelerated loop for
// M_{t-1} preconditioned by the level-(t+1) solver, bottoming out at bsolve,
// which must carry accuracy <= 1/(10 kappa_T).
SolverHandle rpagd(const PreconChain& chain, SolverHandle bsolve, double epsilon,
                   const RpagdOptions& opts = {});

// Regularized chain: sketches of one matrix paired with a nondecreasing ridge
// schedule, such that consecutive regularized Grams stay within factor 4.
struct RegularizedLevel {
  DenseMatrix a;
  double nu = 0.0;
};

struct RegularizedChain {
  std::vector<RegularizedLevel> entries;  // entries[t] = (A_t, nu_t)

  Index dim() const;
  Index depth() const { return static_cast<Index>(entries.size()) - 1; }
  void validate() const;
};

// M_t = 4^t (A_t' A_t + nu_t I) with kappa_t = 16 nu_t / nu_{t-1}. The 4^t
// growth restores the one-sided ordering that the factor-4 Gram approximation
// alone does not give; the head carries 4^0 = 1, so solutions for M_0 are
// solutions for A_0' A_0 + nu_0 I unchanged, while a base solver built for
// the unscaled last level must be read through scale_target(., 4^T).
// epsilon is the head accuracy the lifted chain is meant to be solved at;
// it is range-checked here and otherwise only consumed by rpagd.
PreconChain lift_regularized_chain(const RegularizedChain& chain, double epsilon, WorkPtr work);

// Sketch sizing shared by the chain builders. eps_level is the per-level
// embedding distortion; the default keeps each sketched Gram within factor 2
// of the full one at the scheduled ridge.
struct ChainBuildConfig {
  double nu_base = 1e6;
  double eps_level = 1.0 / 6.0;
  double c_s = 4.0;
  double c_b = 2.0;
};

// Geometric ridge ladder: nu_0 = u k / d, nu_t = nu_0 * nu_base^t, sketch
// ranks k_t = ceil(d nu_base^{1-t}) clamped to [k, d], with
// T = max(1, ceil(ln(d/k) / ln(nu_base))).
struct GeometricSchedule {
  Index T = 1;
  std::vector<Index> k_t;     // size T+1, k_t[0] = d
  std::vector<double> nu_t;   // size T+1
};

GeometricSchedule geometric_schedule(Index d, Index k, double u, double nu_base = 1e6);

// Chain over sketches of a with the geometric schedule anchored at
// u, a factor-2 estimate of the rank-k tail mean of a.
RegularizedChain build_chain_geometric(const DenseMatrix& a, Index k, double u, double delta,
                                       std::uint64_t seed, const WorkPtr& work,
                                       const ChainBuildConfig& cfg = {});

// Doubly exponential rank decay: k_t = max(ceil(d exp(-alpha t^2)), 2k) with
// T = max(1, ceil(sqrt(ln(d/(2k)) / alpha))). The ridge list is clamped to a
// running maximum so the schedule is always nondecreasing.
struct ScheduleParams {
  double alpha = 0.0;
  Index k = 1;
  Index T = 1;
  std::vector<Index> k_t;     // size T+1, k_t[0] = d
  std::vector<double> nu_t;   // size T+1

  void validate(Index d) const;
};

ScheduleParams optimized_schedule(Index d, Index k, double alpha,
                                  const std::vector<double>& nu_list);

// Chain over sketches of a at rank 4 k_t following the doubly exponential
// schedule. nu_list supplies ridge candidates for t = 0..T (extra entries
// are ignored); pass tail means of a spectrum estimate at the scheduled
// ranks. Rejects 2k > d; that regime belongs to a dense base case.
RegularizedChain build_chain_optimized(const DenseMatrix& a, Index k, double alpha,
                                       const std::vector<double>& nu_list, double delta,
                                       std::uint64_t seed, const WorkPtr& work,
                                       const ChainBuildConfig& cfg = {});

// Drops levels whose sketches kept at least max_rows rows; at working sizes
// such levels only add ridge rungs without shrinking the base. All sketches
// approximate the same head, so the surviving suffix is again a valid chain.
RegularizedChain prune_chain(const RegularizedChain& chain, Index max_rows);

enum class WarmupMode { geometric, optimized };

// Singular-value estimates, non-increasing, each within factor sqrt(2).
struct SpectrumHints {
  std::vector<double> sigma;

  bool empty() const { return sigma.empty(); }
};

struct WarmupOptions {
  double delta = 0.05;
  double alpha = 0.0;      // 0 derives alpha from the hints
  double kappa_cap = 0.0;  // 0 means 4 d^2; grid gives up past this
  // Shared work budget for grid candidates (mul-adds + overhead), 0 means
  // unbounded. At least one candidate is always evaluated.
  std::int64_t grid_work_budget = 0;
  ChainBuildConfig chain;
};

struct WarmupReport {
  double u = 0.0;
  double kappa_tilde = 0.0;
  Index grid_candidates = 0;
  Index chain_depth = 0;
  Index retries = 0;
  bool certified = false;
  bool used_grid = false;
};

// Least-squares solve min ||a x - b|| to relative residual-error epsilon:
// reduce to the normal equations, precondition with twice the ridged Gram of
// a row sketch, and solve that Gram through a regularized chain. With hints
// the ridge anchor and condition surrogate come from the estimated spectrum;
// without them (geometric mode only) both are found by a doubling grid,
// keeping the candidate with the smallest residual, ties to the smaller
// anchor. Throws numeric_error("ill-posed instance ...") when no candidate
// ever certifies.
Vector regression_solve_warmup(const DenseMatrix& a, const Vector& b, Index k, double epsilon,
                               WarmupMode mode, const SpectrumHints& hints, std::uint64_t seed,
                               WorkPtr work, const WarmupOptions& opts = {},
                               WarmupReport* report = nullptr);

}  // namespace skch
