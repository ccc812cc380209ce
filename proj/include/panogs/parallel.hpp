#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace panogs {

/// Thread count: PANOGS_THREADS env override, else hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("PANOGS_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

/// Runs fn(i) for i in [0, n). Work items must write disjoint state; the
/// partition is static so results never depend on scheduling.
inline void parallel_for(int n, int num_threads, const std::function<void(int)>& fn) {
  if (num_threads <= 0) num_threads = default_thread_count();
  num_threads = std::min(num_threads, n);
  if (num_threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(num_threads);
  for (int t = 0; t < num_threads; ++t) {
    pool.emplace_back([=, &fn] {
      for (int i = t; i < n; i += num_threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace panogs
