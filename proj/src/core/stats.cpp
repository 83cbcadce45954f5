#include "cmpx/core/stats.hpp"

namespace cmpx {

OpCounters& counters()
{
    thread_local OpCounters c;
    return c;
}

void reset_counters() { counters() = OpCounters{}; }

}  // namespace cmpx
