#pragma once

#include <cstddef>
#include <functional>

namespace qfilter {

// Worker count: `requested` (0 = hardware concurrency), capped by the
// QFILTER_THREADS environment variable when it is set.
std::size_t resolve_threads(std::size_t requested = 0);

// Calls body(i) for i in [0, n) on up to `threads` workers. Work items are
// claimed dynamically, so body must only write to slot i. The first exception
// thrown by any item is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace qfilter
