#pragma once

namespace lidarsim::runtime {

// Global thread count for the parallel kernels. 1 selects the serial
// reference implementations (the determinism contract), 0 lets OpenMP pick,
// anything else pins the team size.
void set_threads(int n);
int threads();

// True when the parallel kernel path should be used.
bool parallel_enabled();

}  // namespace lidarsim::runtime
