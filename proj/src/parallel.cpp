#include "rectilab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace rectilab {

namespace {
std::atomic<int> g_workers{0};
}

int default_workers() {
  if (int w = g_workers.load(); w > 0) return w;
  if (const char* e = std::getenv("RECTILAB_WORKERS")) {
    try {
      int w = std::stoi(e);
      if (w > 0) return w;
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_workers(int n) { g_workers = n; }

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

}  // namespace rectilab
