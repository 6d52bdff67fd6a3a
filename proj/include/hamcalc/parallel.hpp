#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace hamcalc {

// Worker count: min(hardware, HAMCALC_THREADS if set), at least 1.
inline int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  int n = hw ? static_cast<int>(hw) : 1;
  if (const char* env = std::getenv("HAMCALC_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

// Runs fn(i) for i in [begin, end). Chunked static split; results must be
// written to disjoint slots so the outcome is identical to the serial run.
inline void parallel_for(long begin, long end,
                         const std::function<void(long)>& fn) {
  long count = end - begin;
  if (count <= 0) return;
  int workers = worker_count();
  if (workers <= 1 || count < 2 * workers) {
    for (long i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  long chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    long lo = begin + w * chunk;
    long hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (long i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace hamcalc
