#pragma once

#include <cstddef>
#include <functional>

namespace collide_charge {

// Worker count: COLLIDE_CHARGE_THREADS if set, otherwise the hardware
// concurrency (at least 1).
std::size_t worker_count();

// Calls body(worker, begin, end) on disjoint contiguous slices of
// [0, count). Exceptions from workers are rethrown on the caller.
void parallel_chunks(std::size_t count,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace collide_charge
