#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace df {

// Process-wide worker count for parallel_for. 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous index blocks, one
// per worker; every index is processed by exactly one thread, so writes to
// disjoint outputs are race-free and results do not depend on the worker
// count. Nested calls from inside a worker run inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace df
