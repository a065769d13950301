#pragma once

#include <cstddef>
#include <functional>

namespace hashtrace {

/// Worker cap for parallel loops. 0 means "use HASHTRACE_THREADS, else 1".
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs fn(i) for i in [0, n). Each index is visited exactly once; callers
/// write results into per-index slots so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hashtrace
