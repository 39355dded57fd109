#pragma once

#include <vector>

#include "sketchchain/common.hpp"

// Exact dense reference computations (SVD, eigendecompositions, direct
// solves). Test support and --verify paths only; production solver code must
// not link against this.

namespace skch::oracle {

// Singular values of a, non-increasing.
std::vector<double> singular_values(const DenseMatrix& a);

// Eigenvalues of symmetric m, non-increasing.
std::vector<double> eigenvalues_sym(const DenseMatrix& m);

// ||xhat - M^{-1} b||_M^2 / ||b||_{M^{-1}}^2 for PD M: the solver contract's
// left-hand side measured exactly. xhat = 0 gives 1.
double m_norm_error(const DenseMatrix& m, const Vector& xhat, const Vector& b);

// Smallest c with c^{-1} N <= M <= c N (Loewner order), via the generalized
// symmetric eigenproblem M x = lambda N x. Both inputs PD.
double approx_factor(const DenseMatrix& m, const DenseMatrix& n);

// min_x ||a x - b||_2 via QR.
Vector least_squares(const DenseMatrix& a, const Vector& b);

// ||A xhat - A x*|| / ||A x*|| with x* the exact least-squares solution.
double ls_error_ratio(const DenseMatrix& a, const Vector& b, const Vector& xhat);

// ||xhat - x*||_M / ||x*||_M for PD M and x* = M^{-1} b.
double pd_error_ratio(const DenseMatrix& m, const Vector& b, const Vector& xhat);

// Schatten p-norm from exact singular values.
double schatten_norm(const DenseMatrix& a, double p);

}  // namespace skch::oracle
