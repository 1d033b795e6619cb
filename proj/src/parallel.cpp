#include "ssacnn/parallel.hpp"

#include <atomic>

namespace ssacnn {

namespace {
std::atomic<int> g_threads{0};
}

void set_worker_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int worker_threads() { return g_threads.load(); }

}  // namespace ssacnn
