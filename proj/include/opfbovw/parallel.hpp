#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace opfbovw {

// Worker cap: OPFBOVW_THREADS if set to a positive integer, else the number of logical cores.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("OPFBOVW_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n). Results must be written to per-index slots by the caller,
// so scheduling order never affects the outcome. The first exception thrown is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t workers = worker_count()) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace opfbovw
