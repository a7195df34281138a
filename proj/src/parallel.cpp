#include "bdlab/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace bdlab {
namespace {
std::atomic<int> g_override{0};
}

int worker_threads() {
  if (const int o = g_override.load(); o > 0) return o;
  if (const char* env = std::getenv("BDLAB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void set_worker_threads(int n) { g_override.store(std::max(0, n)); }

}  // namespace bdlab
