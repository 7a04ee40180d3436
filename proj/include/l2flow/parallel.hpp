#pragma once

#include <cstddef>
#include <functional>

namespace l2flow {

/// Worker count for pointwise kernels. Reads L2FLOW_THREADS once; defaults to the
/// hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs body(begin, end) over contiguous chunks of [0, n). Each index is visited by
/// exactly one worker, so kernels writing only to their own index stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace l2flow
