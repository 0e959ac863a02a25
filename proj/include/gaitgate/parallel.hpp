#pragma once

#include <cstddef>
#include <functional>

namespace gaitgate {

// GAITGATE_THREADS if set and positive, else hardware concurrency (>= 1).
std::size_t default_threads();

// Calls fn(i) for i in [0, n) on up to `threads` workers with a static
// contiguous partition. If any call throws, the exception from the lowest
// index is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace gaitgate
