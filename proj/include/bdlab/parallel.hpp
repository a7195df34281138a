#pragma once
// Block-parallel loops. Work is split into contiguous index blocks; callers
// write per-index results and reduce them sequentially, so results do not
// depend on the thread count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bdlab {

/// Worker count: the override if set, else BDLAB_THREADS, else hardware concurrency.
int worker_threads();

/// Overrides the worker count for this process; 0 restores the environment default.
void set_worker_threads(int n);

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_threads()), n);
  if (workers <= 1 || n < 256) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Sum of fn(i) over [0, n), evaluated in parallel and reduced in index order.
template <class Fn>
double parallel_sum(std::size_t n, Fn&& fn) {
  std::vector<double> parts(n);
  parallel_for(n, [&](std::size_t i) { parts[i] = fn(i); });
  double s = 0.0;
  for (double p : parts) s += p;
  return s;
}

}  // namespace bdlab
