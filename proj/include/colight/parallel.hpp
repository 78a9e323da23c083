#pragma once

#include <cstddef>
#include <functional>

namespace colight {

/// Process thread count. 0 = use hardware concurrency. Set once by the CLI.
void set_thread_count(int n);
int thread_count();

/// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. Chunking depends only on n and the thread count, and workers write
/// disjoint outputs, so results are bit-identical across runs.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn);

}  // namespace colight
