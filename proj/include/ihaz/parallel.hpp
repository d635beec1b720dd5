#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ihaz {

/// Caps worker threads for every parallel loop in the library (0 = hardware).
void set_max_threads(unsigned n);
unsigned max_threads();

namespace detail {
extern thread_local bool in_parallel_region;
}

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs; any
/// reduction happens afterwards in index order, so results do not depend on
/// the thread count. Nested calls run serially on the calling worker. The
/// first exception thrown (lowest index wins) is rethrown on the caller.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned cap = max_threads();
  const std::size_t workers = std::min<std::size_t>(cap, n);
  if (workers <= 1 || detail::in_parallel_region) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr error;
  std::size_t error_index = n;
  auto run = [&] {
    detail::in_parallel_region = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
    detail::in_parallel_region = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ihaz
