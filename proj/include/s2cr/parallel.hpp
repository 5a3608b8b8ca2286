#pragma once

#include <functional>

namespace s2cr {

/// Worker count: S2CR_THREADS if set and positive, else hardware concurrency.
int default_thread_count();

/// Splits [0, n) into at most `threads` contiguous chunks and runs
/// fn(begin, end) for each. Chunks run on a process-wide worker pool plus the
/// calling thread; returns after every chunk has finished. The first exception
/// thrown by a chunk is rethrown to the caller.
void parallel_for(int n, int threads, const std::function<void(int, int)>& fn);

}  // namespace s2cr
