#pragma once

#include <cstddef>
#include <functional>

namespace coxlasso {

// Runs fn(i) for every i in [0, count). Tasks must be independent and write
// only to their own output slot. Work is handed out through a shared atomic
// counter, so which thread runs which task is scheduling dependent, but the
// set of calls and their outputs are not. Callers reduce results in index
// order afterwards, which keeps aggregate output byte-identical for any
// thread count.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace coxlasso
