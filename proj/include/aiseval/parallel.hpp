#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

namespace aiseval {

/// Worker count from AISEVAL_WORKERS, falling back to the hardware
/// concurrency (at least 1).
std::size_t default_workers();

/// Calls task(i) for i in [0, n) on up to `workers` threads. Tasks must be
/// independent; results are gathered by index, so scheduling order never
/// shows in the output. The first exception thrown by any task is rethrown
/// after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task,
                  std::size_t workers);

template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t n, Fn&& fn, std::size_t workers) {
  std::vector<Result> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = fn(i); }, workers);
  return out;
}

}  // namespace aiseval
