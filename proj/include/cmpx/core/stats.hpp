#pragma once

#include <cstddef>

namespace cmpx {

/// Per-thread operation counters used for benchmark records.
struct OpCounters {
    std::size_t projection_calls = 0;
    std::size_t nproj_calls = 0;
    std::size_t charts_created = 0;
    std::size_t collision_checks = 0;
};

/// Counters of the calling thread. Reset at the start of a query.
OpCounters& counters();
void reset_counters();

}  // namespace cmpx
