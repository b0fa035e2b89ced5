#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace subxfer {

/// Evaluates fn(i) for i in [0, n) on up to `threads` workers and returns the
/// results indexed by i. Each index writes only its own slot, so callers that
/// reduce the results in index order get identical output for any thread
/// count.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t threads, Fn&& fn) {
  std::vector<T> out(n);
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            out[i] = fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

/// Runs per-item work in fixed-size waves and hands each result to `reduce`
/// in item order. Bounds memory to one wave of results.
template <typename T, typename Work, typename Reduce>
void ordered_parallel_reduce(std::size_t n, std::size_t threads, Work&& work, Reduce&& reduce,
                             std::size_t wave = 4096) {
  for (std::size_t begin = 0; begin < n; begin += wave) {
    const std::size_t count = std::min(wave, n - begin);
    auto results = parallel_map<T>(count, threads, [&](std::size_t i) { return work(begin + i); });
    for (auto& r : results) reduce(r);
  }
}

}  // namespace subxfer
