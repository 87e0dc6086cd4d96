#pragma once

#include <cstddef>
#include <functional>

namespace coverdet {

/// Worker count: COVERDET_THREADS if set and positive, else hardware threads.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; callers keep results in per-index slots so the outcome does
/// not depend on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = 0);

}  // namespace coverdet
