#pragma once

// ============================================================================
// Minimal deterministic work distribution. Results must be written to
// caller-owned per-index slots; combined with per-index seed derivation this
// makes every estimate independent of the thread schedule.
// ============================================================================

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace dlimit::kernel {

/// Number of worker threads: DLIMIT_THREADS if set, else hardware concurrency.
int resolve_threads();

/// Runs fn(i) for i in [0, n). With nthreads <= 1 this is a plain loop.
inline void parallel_for(std::size_t n, int nthreads,
                         const std::function<void(std::size_t)>& fn) {
  if (nthreads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int k = nthreads < static_cast<int>(n) ? nthreads : static_cast<int>(n);
  pool.reserve(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace dlimit::kernel
