#pragma once

#include <cstddef>
#include <functional>

namespace omnicomb {

/// Worker count from OMNI_THREADS (unset or 0 means hardware concurrency).
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Each index is processed exactly once and
/// callers write results into per-index slots, so output never depends on
/// scheduling. Calls made from inside a running parallel_for execute serially
/// on the calling worker. The first exception thrown by any body (lowest
/// index wins) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace omnicomb
