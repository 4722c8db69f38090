#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace curlhom {

/// Runs body(i) for i in [0, count) on up to `workers` threads. Work is
/// claimed dynamically but every index is processed exactly once, so results
/// written to per-index slots do not depend on the worker count. The first
/// exception (lowest index) is rethrown after all workers stop.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  workers = std::max(1, std::min<int>(workers, int(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::mutex m;
  std::size_t next = 0;
  std::size_t failed_at = count;
  std::exception_ptr error;
  auto run = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(m);
        if (next >= count || error) return;
        i = next++;
      }
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (i < failed_at) {
          failed_at = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace curlhom
