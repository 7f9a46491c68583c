#include "mdae/common.hpp"

namespace mdae {

namespace {
int g_thread_cap = 0;
}

void set_thread_cap(int n) { g_thread_cap = n < 0 ? 0 : n; }
int thread_cap() { return g_thread_cap; }

} // namespace mdae
