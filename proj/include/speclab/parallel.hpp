#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "speclab/errors.hpp"

namespace speclab {

// Runs fn(i) for i in [0, n) across `jobs` threads. Each item writes only to
// its own preassigned slot, so results never depend on the worker count or
// on scheduling order. The first exception thrown by any item is rethrown.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  require(jobs >= 1, Err::BadJobs, "jobs must be >= 1");
  if (jobs == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::exception_ptr first_error;
  std::size_t next = 0;
  auto worker = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (first_error || next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Fixed-size sample blocks for Monte-Carlo reductions: workers fill per-block
// partials (any order), the caller folds the blocks in index order so the
// reduction is bit-identical at every --jobs setting.
constexpr std::size_t kMonteCarloBlock = 4096;

inline std::size_t block_count(std::size_t samples) {
  return (samples + kMonteCarloBlock - 1) / kMonteCarloBlock;
}

}  // namespace speclab
