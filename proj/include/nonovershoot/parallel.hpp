#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace nos {

inline unsigned default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Evaluates fn(i) for i in [0, n) on up to `threads` workers and returns the
/// results in index order. Output never depends on the thread count. If any
/// call throws, the exception from the lowest index is rethrown.
template <class Fn>
auto parallel_map(std::size_t n, unsigned threads, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
  using T = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<T> out(n);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));

  std::exception_ptr error;
  std::size_t error_index = n;
  std::mutex error_mutex;
  auto record = [&](std::size_t i, std::exception_ptr e) {
    std::lock_guard lock(error_mutex);
    if (i < error_index) {
      error_index = i;
      error = e;
    }
  };

  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        out[i] = fn(i);
      } catch (...) {
        record(i, std::current_exception());
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    constexpr std::size_t chunk = 64;
    auto worker = [&] {
      for (;;) {
        const std::size_t begin = next.fetch_add(chunk);
        if (begin >= n) return;
        const std::size_t end = std::min(n, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) {
          try {
            out[i] = fn(i);
          } catch (...) {
            record(i, std::current_exception());
            return;
          }
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace nos
