#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace pml {

/// Process-wide worker count used by internally parallel loops (>= 1).
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is
/// processed exactly once, so writing into per-index slots and reducing
/// afterwards in index order gives results independent of the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n / 256 + 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace pml
