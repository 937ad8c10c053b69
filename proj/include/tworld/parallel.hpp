#pragma once

#include <cstddef>
#include <functional>

namespace tworld {

/// Runs independent index ranges on a fixed number of worker threads.
class Executor {
 public:
  explicit Executor(int threads = 1);

  int threads() const { return threads_; }

  /// Calls fn(i) for every i in [0, n). If any call throws, the exception
  /// from the lowest failing index is rethrown after all workers stop.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) const;

 private:
  int threads_;
};

/// Thread count from TWORLD_THREADS, else 1.
int default_thread_count();

}  // namespace tworld
