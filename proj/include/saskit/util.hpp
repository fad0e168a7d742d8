#pragma once

#include <functional>

namespace saskit {

/// Worker count: SASKIT_THREADS when set (0 means auto), otherwise
/// hardware_concurrency clamped to 8.
int thread_count();

/// Runs fn(0..n-1) across worker threads. Callers must make cells
/// independent; results keyed by index stay deterministic regardless of
/// scheduling.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace saskit
