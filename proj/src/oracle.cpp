#include "sketchchain/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace skch::oracle {

std::vector<double> singular_values(const DenseMatrix& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(a)};
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

std::vector<double> eigenvalues_sym(const DenseMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(m)};
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::reverse(ev.begin(), ev.end());
  return ev;
}

double m_norm_error(const DenseMatrix& m, const Vector& xhat, const Vector& b) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt{Eigen::MatrixXd(m)};
  Vector xstar = ldlt.solve(b);
  Vector diff = xhat - xstar;
  double num = diff.dot(m * diff);
  double den = b.dot(xstar);
  if (den <= 0.0) throw numeric_error("m_norm_error: b' M^{-1} b is not positive");
  return num / den;
}

double approx_factor(const DenseMatrix& m, const DenseMatrix& n) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges{Eigen::MatrixXd(m),
                                                                Eigen::MatrixXd(n)};
  double lo = ges.eigenvalues().minCoeff();
  double hi = ges.eigenvalues().maxCoeff();
  if (lo <= 0.0) throw numeric_error("approx_factor: inputs are not both positive definite");
  return std::max(hi, 1.0 / lo);
}

Vector least_squares(const DenseMatrix& a, const Vector& b) {
  return Eigen::MatrixXd(a).colPivHouseholderQr().solve(b);
}

double ls_error_ratio(const DenseMatrix& a, const Vector& b, const Vector& xhat) {
  Vector xstar = least_squares(a, b);
  double den = (a * xstar).norm();
  if (den == 0.0) throw numeric_error("ls_error_ratio: A x* is zero");
  return (a * (xhat - xstar)).norm() / den;
}

double pd_error_ratio(const DenseMatrix& m, const Vector& b, const Vector& xhat) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt{Eigen::MatrixXd(m)};
  Vector xstar = ldlt.solve(b);
  Vector diff = xhat - xstar;
  double num = std::sqrt(std::max(0.0, diff.dot(m * diff)));
  double den = std::sqrt(std::max(0.0, xstar.dot(m * xstar)));
  if (den == 0.0) throw numeric_error("pd_error_ratio: x* is zero");
  return num / den;
}

double schatten_norm(const DenseMatrix& a, double p) {
  if (!(p > 0.0)) throw contract_error("schatten_norm requires p > 0");
  auto sv = singular_values(a);
  double acc = 0.0;
  for (double s : sv) acc += std::pow(s, p);
  return std::pow(acc, 1.0 / p);
}

}  // namespace skch::oracle
