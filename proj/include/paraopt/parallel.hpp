#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <exception>
#include <thread>
#include <vector>

namespace paraopt {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Each task must
/// write only to its own output slot; callers then combine slots in index
/// order, which keeps results independent of the worker count.
/// If tasks throw, the exception of the lowest failing index is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(body);
    body();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Worker count from PARAOPT_WORKERS if set and positive, otherwise `fallback`.
inline int default_workers(int fallback) {
  if (const char* env = std::getenv("PARAOPT_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w > 0) return w;
    } catch (const std::exception&) {
    }
  }
  return std::max(fallback, 1);
}

}  // namespace paraopt
