#pragma once

#include <cstddef>
#include <functional>

namespace filterlens {

// Worker count: FILTERLENS_THREADS when set to a positive integer, otherwise
// the hardware concurrency (at least 1).
std::size_t worker_count();

// Calls fn(i) for every i in [0, n) across up to worker_count() threads.
// Exceptions thrown by fn are rethrown on the calling thread (the one with
// the lowest index wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace filterlens
