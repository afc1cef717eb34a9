#pragma once

#include <cstddef>
#include <functional>

namespace ghzbayes {

// Worker count: GHZBAYES_THREADS if set and positive, else the hardware
// concurrency (at least 1).
int worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index is
// processed exactly once; callers write results into per-index slots and
// reduce them in index order, so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ghzbayes
