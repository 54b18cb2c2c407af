#pragma once

#include <cstddef>
#include <functional>

namespace twinforge {

/// Worker cap: TWINFORGE_THREADS when set (>= 1), otherwise the hardware
/// concurrency. set_thread_count() overrides both for the current process.
int thread_count();
void set_thread_count(int n);

/// Calls fn(i) for every i in [0, n). Work is split into contiguous chunks;
/// callers write results into slot i so the outcome does not depend on how
/// many workers ran.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace twinforge
