#include "lidarsim/runtime.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lidarsim::runtime {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) {
    if (n < 0) n = 1;
    g_threads.store(n);
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

int threads() { return g_threads.load(); }

bool parallel_enabled() {
#ifdef _OPENMP
    return g_threads.load() != 1;
#else
    return false;
#endif
}

}  // namespace lidarsim::runtime
