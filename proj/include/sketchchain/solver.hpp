#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "sketchchain/common.hpp"

namespace skch {

struct SolverStats {
  std::atomic<std::int64_t> calls{0};
};

// A solver handle f for a PD matrix M promises, for every b,
//   || f(b) - M^{-1} b ||_M^2  <=  epsilon * || b ||_{M^{-1}}^2.
// epsilon == 0 marks a direct (machine-precision) solver.
class SolverHandle {
public:
  using Fn = std::function<Vector(const Vector&)>;
  using BlockFn = std::function<DenseMatrix(const DenseMatrix&)>;

  SolverHandle() = default;
  SolverHandle(Index dim, double epsilon, std::string target_desc, Fn fn)
      : dim_(dim),
        epsilon_(epsilon),
        desc_(std::move(target_desc)),
        fn_(std::move(fn)),
        stats_(std::make_shared<SolverStats>()) {}

  Vector operator()(const Vector& b) const {
    require(valid(), "solve through an empty SolverHandle");
    require(b.size() == dim_, "solver input dimension mismatch");
    stats_->calls.fetch_add(1, std::memory_order_relaxed);
    return fn_(b);
  }

  // Column-blocked solve; counts one call per column. Falls back to looping.
  DenseMatrix solve_block(const DenseMatrix& b) const;

  bool valid() const { return static_cast<bool>(fn_); }
  Index dim() const { return dim_; }
  double epsilon() const { return epsilon_; }
  const std::string& target_desc() const { return desc_; }
  const std::shared_ptr<SolverStats>& stats() const { return stats_; }
  std::int64_t calls() const { return stats_ ? stats_->calls.load(std::memory_order_relaxed) : 0; }

  void set_block_fn(BlockFn fn) { block_fn_ = std::move(fn); }

private:
  Index dim_ = 0;
  double epsilon_ = 0.0;
  std::string desc_;
  Fn fn_;
  BlockFn block_fn_;
  std::shared_ptr<SolverStats> stats_;
};

// Reads a solver for M as a solver for c M, c > 0. The relative error
// contract is scale invariant, so epsilon carries over unchanged.
SolverHandle scale_target(const SolverHandle& f, double c);

// Inexact matvec handle g for M: ||g(b) - M b||^2 <= accuracy * ||M b||^2.
// kappa_bound, when positive, upper-bounds the condition number of M and is
// carried along so power-method error composition stays computable.
struct MatvecHandle {
  Index dim = 0;
  double accuracy = 0.0;
  double kappa_bound = -1.0;
  std::function<Vector(const Vector&)> fn;

  Vector operator()(const Vector& v) const {
    require(static_cast<bool>(fn), "apply through an empty MatvecHandle");
    require(v.size() == dim, "matvec input dimension mismatch");
    return fn(v);
  }
};

}  // namespace skch
