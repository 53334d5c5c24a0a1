#pragma once
#include <cstddef>
#include <functional>

namespace blocksel {

/// Worker count used by parallel_for. 0 restores the default (hardware concurrency).
void set_thread_count(unsigned n);
unsigned thread_count();

/**
 * Runs fn(i) for i in [0, count) across the worker pool. Each index must write
 * only its own output slot. The first exception thrown by any task is rethrown
 * after all workers join.
 */
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace blocksel
