#pragma once

#include <atomic>
#include <cstdint>

namespace skd::instrumentation {

// Process-wide call counters. Relaxed atomics; read deltas around a region.
struct Counters {
  std::atomic<std::uint64_t> log_partition{0};  // forward (sum-product) recursions
  std::atomic<std::uint64_t> encode{0};          // encoder forward passes
};

Counters& counters();

inline std::uint64_t log_partition_calls() {
  return counters().log_partition.load(std::memory_order_relaxed);
}
inline std::uint64_t encode_calls() {
  return counters().encode.load(std::memory_order_relaxed);
}

}  // namespace skd::instrumentation
