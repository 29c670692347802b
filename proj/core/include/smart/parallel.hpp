#pragma once

#include <cstddef>
#include <functional>

namespace smart {

/// Worker count used by parallel_for. Defaults to the SMART_THREADS environment
/// variable when set, otherwise 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n) split into contiguous static chunks. Each index
/// is visited exactly once; callers write to disjoint outputs so results do not
/// depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace smart
