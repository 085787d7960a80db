#pragma once

#include "rectilab/types.hpp"

#include <cstdint>
#include <random>

namespace rectilab {

// Counter-based seed splitting so that walker i of a run always draws the same
// stream regardless of scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t salt = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(salt)) + stream);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal() { return normal_(engine_); }

  /// Uniform point on the unit sphere S^{d-1}.
  Point on_sphere(int d) {
    Point p(d);
    double n2 = 0.0;
    do {
      for (int i = 0; i < d; ++i) p(i) = normal();
      n2 = p.squaredNorm();
    } while (n2 < 1e-300);
    return p / std::sqrt(n2);
  }

  /// Uniform point in the unit ball of R^d.
  Point in_ball(int d) { return on_sphere(d) * std::pow(uniform(), 1.0 / d); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace rectilab
