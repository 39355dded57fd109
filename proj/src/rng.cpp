#include "sketchchain/rng.hpp"

#include <cmath>

namespace skch {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return mix64(seed ^ mix64(salt * kGolden + 0x632BE59BD9B4E019ull));
}

std::uint64_t Rng::next_u64() {
  ++ctr_;
  return mix64(seed_ + ctr_ * kGolden);
}

double Rng::uniform01() {
  // 53 mantissa bits, shifted into (0,1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  return n ? next_u64() % n : 0;
}

double Rng::gaussian() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  double u1 = uniform01();
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double t = 2.0 * M_PI * u2;
  cached_ = r * std::sin(t);
  have_cached_ = true;
  return r * std::cos(t);
}

int Rng::sign() { return (next_u64() & 1ull) ? 1 : -1; }

}  // namespace skch
