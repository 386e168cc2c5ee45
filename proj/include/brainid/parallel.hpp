#pragma once

#include <cstddef>
#include <functional>

namespace brainid {

// Worker count: set_thread_limit() if called, else BRAINID_THREADS, else hardware concurrency.
std::size_t thread_count();
void set_thread_limit(std::size_t n); // 0 restores the environment/hardware default

// Runs body(begin, end) over disjoint ranges covering [0, n). Nested calls from a worker
// run inline. Results must not depend on the split; reductions should go through
// fixed_chunks() instead.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

// Chunk boundaries independent of the thread count, for deterministic reductions.
constexpr std::size_t kReductionChunk = 4096;
inline std::size_t chunk_count(std::size_t n) { return (n + kReductionChunk - 1) / kReductionChunk; }

} // namespace brainid
