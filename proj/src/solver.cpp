#include "sketchchain/solver.hpp"

namespace skch {

DenseMatrix SolverHandle::solve_block(const DenseMatrix& b) const {
  require(valid(), "solve through an empty SolverHandle");
  require(b.rows() == dim_, "solver block input dimension mismatch");
  stats_->calls.fetch_add(b.cols(), std::memory_order_relaxed);
  if (block_fn_) return block_fn_(b);
  DenseMatrix out(b.rows(), b.cols());
  for (Index j = 0; j < b.cols(); ++j) out.col(j) = fn_(Vector(b.col(j)));
  return out;
}

SolverHandle scale_target(const SolverHandle& f, double c) {
  require(f.valid(), "scale_target requires a valid solver");
  require(c > 0.0, "scale_target requires c > 0");
  auto fn = [f, c](const Vector& b) { return Vector(f(b) / c); };
  return SolverHandle(f.dim(), f.epsilon(), "scaled " + f.target_desc(), std::move(fn));
}

}  // namespace skch
