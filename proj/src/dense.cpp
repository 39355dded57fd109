#include "sketchchain/dense.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <memory>

namespace skch {

SolverHandle dense_pd_factor_solve(const DenseMatrix& m, double ridge, WorkPtr work) {
  require(m.rows() == m.cols(), "dense_pd_factor_solve requires a square matrix");
  require(ridge >= 0.0, "dense_pd_factor_solve requires ridge >= 0");
  const Index d = m.rows();
  require(d > 0, "dense_pd_factor_solve requires a nonempty matrix");

  Eigen::MatrixXd shifted = m;
  if (ridge > 0.0) shifted.diagonal().array() += ridge;

  auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(shifted);
  if (llt->info() != Eigen::Success) {
    throw numeric_error("dense_pd_factor_solve: matrix is not positive definite");
  }
  if (!work) work = make_work();
  work->add_macs(d * d * d / 3);

  SolverHandle h(
      d, 0.0, "cholesky(M + ridge I)",
      [llt, work, d](const Vector& b) {
        work->add_macs(d * d);
        work->add_overhead(2 * d);
        return Vector(llt->solve(b));
      });
  h.set_block_fn([llt, work, d](const DenseMatrix& b) {
    work->add_macs(d * d * b.cols());
    work->add_overhead(2 * d * b.cols());
    Eigen::MatrixXd sol = llt->solve(Eigen::MatrixXd(b));
    return DenseMatrix(sol);
  });
  return h;
}

double kappa_bar(const std::vector<double>& sigma, Index k, double p) {
  const Index d = static_cast<Index>(sigma.size());
  require(d > 0, "kappa_bar requires a nonempty spectrum");
  require(k >= 0 && k < d, "kappa_bar requires 0 <= k < d");
  require(p > 0.0, "kappa_bar requires p > 0");
  for (Index i = 0; i + 1 < d; ++i) {
    require(sigma[i] >= sigma[i + 1], "kappa_bar requires a non-increasing spectrum");
  }
  const double tail = sigma[d - 1];
  require(tail > 0.0, "kappa_bar requires sigma_d > 0");

  if (std::isinf(p)) return sigma[k] / tail;

  double acc = 0.0;
  for (Index i = k; i < d; ++i) acc += std::pow(sigma[i] / tail, p);
  acc /= static_cast<double>(d - k);
  return std::pow(acc, 1.0 / p);
}

}  // namespace skch
