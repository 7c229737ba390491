#pragma once

#include <cstddef>
#include <functional>

namespace commsynth {

// COMMSYNTH_THREADS if set and positive, otherwise the hardware concurrency (at least 1)
int worker_count();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs exactly once;
// fn must not depend on scheduling order. The first exception is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace commsynth
