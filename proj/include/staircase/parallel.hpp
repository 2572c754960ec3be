#pragma once

#include <functional>

namespace staircase {

/// Worker count: the STAIRCASE_THREADS environment variable when set (min 1),
/// otherwise the hardware concurrency.
unsigned effective_threads();

/// Runs body(0..n-1) across up to `threads` workers. Iterations must be
/// independent; any exception is rethrown on the calling thread (first one
/// by iteration index). Results written to per-index slots keep aggregation
/// deterministic regardless of scheduling.
void parallel_for(int n, unsigned threads, const std::function<void(int)>& body);

}  // namespace staircase
