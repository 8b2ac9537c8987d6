#pragma once

#include <cstddef>
#include <functional>

namespace cgat {

/// Worker count: CGAT_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t thread_count();

/// Calls fn(i) for every i in [0, n) on up to thread_count() threads. Each
/// index runs exactly once; results must be written to per-index slots.
/// The first exception thrown by any call is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Keeps freed tensor buffers in the process heap (glibc only). Without it
/// every tape can return its pages to the kernel and fault them back in.
void retain_heap();

}  // namespace cgat
