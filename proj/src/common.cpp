#include "sketchchain/common.hpp"

#include <cmath>

namespace skch {

double log_floor1(double x) {
  if (!(x > 0.0)) throw contract_error("log_floor1 requires a positive argument");
  double v = std::log(x);
  return v < 1.0 ? 1.0 : v;
}

}  // namespace skch
