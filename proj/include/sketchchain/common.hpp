#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace skch {

using Index = std::int64_t;
using Vector = Eigen::VectorXd;

// Row-major float64 storage. Eigen mixes storage orders transparently, so
// internal algorithms may still produce column-major temporaries.
using DenseMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Contract violations (bad dimensions, invalid parameters) throw this.
class contract_error : public std::invalid_argument {
public:
  explicit contract_error(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failures (non-PD input, exhausted candidate ladder) throw this.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw contract_error(msg);
}

// Natural log floored at 1, the convention used by every sizing formula here.
double log_floor1(double x);

// Requested solver accuracies below this are clamped up to it.
inline constexpr double kEpsilonFloor = 1e-14;

inline double clamp_epsilon(double eps) {
  return eps < kEpsilonFloor ? kEpsilonFloor : eps;
}

}  // namespace skch
