#pragma once

#include <vector>

#include "sketchchain/common.hpp"
#include "sketchchain/solver.hpp"
#include "sketchchain/work.hpp"

namespace skch {

// Cholesky-backed exact solver for M + ridge*I. Throws numeric_error when the
// shifted matrix is not positive definite. Charges d^3/3 once at construction
// and d^2 (+2d overhead) per solve. The handle also supports block solves.
SolverHandle dense_pd_factor_solve(const DenseMatrix& m, double ridge, WorkPtr work);

inline SolverHandle dense_pd_factor_solve(const DenseMatrix& m, WorkPtr work) {
  return dense_pd_factor_solve(m, 0.0, std::move(work));
}

// Averaged tail condition number of a spectrum given in non-increasing order:
//   kappa_bar(sigma, k, p) = ((1/(d-k)) * sum_{i>k} (sigma_i/sigma_d)^p)^(1/p),
// with p = +infinity giving sigma_{k+1}/sigma_d. Requires 0 <= k < d and
// sigma_d > 0. p > 0 (p may be +infinity).
double kappa_bar(const std::vector<double>& sigma, Index k, double p);

}  // namespace skch
