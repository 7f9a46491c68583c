#pragma once

#ifdef _OPENMP
#include <omp.h>
#else
inline int omp_get_max_threads() { return 1; }
inline int omp_get_thread_num() { return 0; }
#endif

namespace mdae {

inline int worker_count(int cap) {
    const int max = omp_get_max_threads();
    return (cap > 0 && cap < max) ? cap : max;
}

} // namespace mdae
