#pragma once

#include <cstddef>
#include <functional>

namespace zonocert {

// Runs fn(i) for i in [0, n) across up to `threads` workers. Work items are
// handed out by index; callers must write results into per-index slots so the
// outcome is independent of scheduling. threads <= 1 runs inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads);

// Thread count resolution: explicit argument > ZONOCERT_THREADS env > 1.
int resolve_threads(int requested = 0);

} // namespace zonocert
