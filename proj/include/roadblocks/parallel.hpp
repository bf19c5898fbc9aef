#pragma once

#include <cstddef>
#include <functional>

namespace roadblocks {

/// Runs fn(0) .. fn(n - 1) on up to `threads` workers. Items are claimed in
/// index order; the first exception thrown by any item is rethrown after all
/// workers have stopped.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// `ROADBLOCKS_THREADS` if set to a positive integer, else 1.
int default_threads();

}  // namespace roadblocks
