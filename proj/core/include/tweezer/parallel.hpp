#pragma once

#include <cstddef>
#include <functional>

namespace tweezer {

/// Worker count from TWEEZER_FORGE_THREADS, falling back to the hardware
/// concurrency. Always >= 1.
int default_thread_count();

/// Resolves a user request: values <= 0 mean "use the default".
int resolve_thread_count(int requested);

/// Calls fn(i) for every i in [0, n). Work is handed out dynamically, so
/// callers must write results by index; the outcome is then independent of
/// the worker count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace tweezer
