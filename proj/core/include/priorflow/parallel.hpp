#pragma once

#include <cstddef>
#include <functional>

namespace priorflow {

/// Caps the number of worker threads used by parallel_for (0 = hardware concurrency).
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs fn(i) for i in [0, n). Each index must write only its own output slot;
/// reductions happen afterwards in index order, which keeps results independent
/// of scheduling. Nested calls from a worker run inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace priorflow
