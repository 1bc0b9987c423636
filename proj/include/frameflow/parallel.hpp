#pragma once

#include <cstddef>
#include <functional>

namespace frameflow {

/// Process-wide default worker count (0 = hardware concurrency).  The CLI
/// sets this from --threads; library callers may also pass an explicit
/// count to parallel_for.
void set_default_threads(int n);
int default_threads();

/// Runs fn(i) for i in [0, n).  Work items must be independent; results
/// must be written to preallocated slots so the outcome does not depend on
/// scheduling.  Exceptions from workers are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int threads = 0);

}  // namespace frameflow
