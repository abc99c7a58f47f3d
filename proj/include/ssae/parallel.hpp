#pragma once

#include <cstddef>
#include <functional>

namespace ssae {

/// Worker count: SSAE_THREADS if set and positive, else hardware concurrency.
unsigned worker_threads();

/// Run fn(i) for i in [0, n).  Work is split into contiguous ranges; callers
/// write results into per-index slots so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace ssae
