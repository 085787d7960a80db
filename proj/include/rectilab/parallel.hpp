#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rectilab {

/// Worker count used when a call passes 0: set_workers() if called, else
/// RECTILAB_WORKERS, else the hardware concurrency.
int default_workers();
void set_workers(int n);

/// f(i) for i in [0, n) on up to `workers` threads. Work is handed out in
/// contiguous blocks; callers write results by index so the outcome does not
/// depend on the schedule. The first exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, F&& f, int workers = 0) {
  if (workers <= 0) workers = default_workers();
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  const std::size_t block = std::max<std::size_t>(1, n / (8 * w));
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex m;
  auto run = [&] {
    while (true) {
      std::size_t lo = next.fetch_add(block);
      if (lo >= n) return;
      std::size_t hi = std::min(n, lo + block);
      try {
        for (std::size_t i = lo; i < hi; ++i) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(m);
        if (!err) err = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < w; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

/// Pairwise (cascade) summation in index order.
double pairwise_sum(const double* x, std::size_t n);
inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

}  // namespace rectilab
