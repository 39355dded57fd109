#pragma once

#include <cstdint>

namespace skch {

// Counter-based generator: value i of stream `seed` is a SplitMix64 finalizer
// applied to seed + (i+1)*golden. Streams derived via derive_seed are disjoint
// for practical purposes and independent of evaluation order, which is what
// makes per-column sketch regeneration bit-identical.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  // Uniform on (0,1), never exactly 0 or 1.
  double uniform01();
  // Uniform integer in [0, n), n > 0. Rejection-free modulo is fine here:
  // bias is < 2^-40 for the n used by sketch generation.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller, one value cached.
  double gaussian();
  // +1 or -1.
  int sign();

private:
  std::uint64_t seed_;
  std::uint64_t ctr_ = 0;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace skch
