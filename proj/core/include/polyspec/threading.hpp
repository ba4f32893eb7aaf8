#pragma once

#include <functional>

namespace polyspec::threading {

// Worker budget: POLYSPEC_THREADS when set (minimum 1), else the machine
// parallelism.
int thread_budget();

// Runs fn(i) for i in [0, n) across at most thread_budget() workers; blocks
// until done. Iterations must be independent; results are deterministic as
// long as fn(i) writes only to i-indexed state.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace polyspec::threading
