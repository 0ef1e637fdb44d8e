#pragma once

#include <cstddef>
#include <functional>

namespace gqcnn {

/// Worker count: GF_THREADS when set to a positive integer, otherwise the
/// hardware concurrency. Read once per process.
int thread_count();

/// Runs body(i) for i in [0, count). Each index is processed by exactly one
/// thread; callers keep results independent of scheduling by writing only to
/// index-owned storage.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace gqcnn
