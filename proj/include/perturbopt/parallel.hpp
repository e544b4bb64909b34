#pragma once

// Static-partition parallel loop. Work items write into preallocated slots;
// callers reduce serially in index order, so results never depend on the
// worker count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace perturbopt {

/// Process-wide worker count (1 disables threading). Zero restores the default.
void set_thread_count(unsigned n);
unsigned thread_count();

namespace detail {
/// Set on pool workers; nested loops then run inline instead of spawning.
inline thread_local bool in_worker = false;
}  // namespace detail

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1 || detail::in_worker) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      detail::in_worker = true;
      try {
        for (std::size_t i = t; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace perturbopt
