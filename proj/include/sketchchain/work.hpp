#pragma once

#include <atomic>
#include <cstdint>
#include <memory>

namespace skch {

// Two counters so the dense-apply identity stays exact: applying a dense n x d
// operator adds exactly n*d to mul_adds, while the fixed per-application cost
// (n + d) accumulates separately. Reported work is the sum.
struct WorkCounter {
  std::atomic<std::int64_t> mul_adds{0};
  std::atomic<std::int64_t> apply_overhead{0};

  void add_macs(std::int64_t m) { mul_adds.fetch_add(m, std::memory_order_relaxed); }
  void add_overhead(std::int64_t v) { apply_overhead.fetch_add(v, std::memory_order_relaxed); }

  std::int64_t macs() const { return mul_adds.load(std::memory_order_relaxed); }
  std::int64_t overhead() const { return apply_overhead.load(std::memory_order_relaxed); }
  std::int64_t total() const { return macs() + overhead(); }

  void reset() {
    mul_adds.store(0, std::memory_order_relaxed);
    apply_overhead.store(0, std::memory_order_relaxed);
  }
};

using WorkPtr = std::shared_ptr<WorkCounter>;

inline WorkPtr make_work() { return std::make_shared<WorkCounter>(); }

}  // namespace skch
