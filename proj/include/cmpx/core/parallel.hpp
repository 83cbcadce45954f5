#pragma once

#include <cstddef>
#include <functional>

namespace cmpx {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads (jobs <= 1 runs inline). The first
/// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace cmpx
