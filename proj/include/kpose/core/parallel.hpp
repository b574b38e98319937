#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace kpose {

using Index = Eigen::Index;

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(begin, end) over a static block partition of [0, n). Blocks are
/// fixed by (n, workers) alone, so any per-index computation is independent
/// of how the threads get scheduled.
template <typename Fn>
void parallel_for(Index n, unsigned workers, Fn&& fn) {
  if (n <= 0) return;
  const Index w = std::min<Index>(resolve_workers(workers), n);
  if (w == 1) {
    fn(Index{0}, n);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> threads;
  threads.reserve(static_cast<std::size_t>(w));
  for (Index t = 0; t < w; ++t) {
    const Index begin = n * t / w;
    const Index end = n * (t + 1) / w;
    threads.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  threads.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace kpose
