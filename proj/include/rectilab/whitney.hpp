#pragma once

#include "rectilab/dyadic.hpp"

#include <array>
#include <functional>

namespace rectilab {

enum class Side { Interior, Exterior, Both };
Side side_from_string(const std::string& s);

/// Closed dyadic cube [idx 2^-k, (idx+1) 2^-k] of R^d.
struct WhitneyCube {
  int k = 0;
  int d = 0;
  std::array<long long, 4> idx{};
  bool exterior = false;

  double side() const { return std::ldexp(1.0, -k); }
  double diameter() const { return side() * std::sqrt(static_cast<double>(d)); }
  Box box() const;
  Point center() const { return box().center(); }
  WhitneyCube parent() const;
  WhitneyCube child(int mask) const;

  bool operator==(const WhitneyCube& o) const { return k == o.k && idx == o.idx; }
  bool operator<(const WhitneyCube& o) const { return k != o.k ? k < o.k : idx < o.idx; }
};

struct WhitneyCubeHash {
  std::size_t operator()(const WhitneyCube& c) const;
};

/// Dyadic cube of generation k containing x (lower faces closed).
WhitneyCube dyadic_cube_at(const Point& x, int k);

struct WhitneyOptions {
  /// Accept maximal dyadic cubes with dist(I, E) >= ratio * diam(I).
  double ratio = 6.0;
  /// Cubes finer than this generation are never produced (collar).
  int k_finest = 40;
};

/// Whitney decomposition of R^d \ E restricted to a window, generated lazily
/// by descending from the coarse cubes covering the window.
class WhitneyDecomposition {
 public:
  WhitneyDecomposition(BoundaryPtr E, const Box& window, Side side, const WhitneyOptions& opt = {});

  const BoundaryModel& boundary() const { return *E_; }
  BoundaryPtr boundary_ptr() const { return E_; }
  const Box& window() const { return window_; }
  Side side() const { return side_; }
  int k_top() const { return k_top_; }
  int k_finest() const { return opt_.k_finest; }
  const WhitneyOptions& options() const { return opt_; }

  /// Calls f for every cube of generation <= k_stop meeting the closed region.
  void visit(const Box& region, int k_stop, const std::function<void(const WhitneyCube&)>& f) const;
  std::vector<WhitneyCube> cubes(const Box& region, int k_stop) const;
  std::vector<WhitneyCube> cubes(int k_stop) const { return cubes(window_, k_stop); }
  std::optional<WhitneyCube> containing(const Point& x, int k_stop) const;
  std::optional<WhitneyCube> containing(const Point& x) const { return containing(x, opt_.k_finest); }
  /// Cubes whose closures meet the closure of I.
  std::vector<WhitneyCube> neighbors(const WhitneyCube& I) const;
  /// Neighbors sharing a piece of a (d-1)-dimensional face.
  std::vector<WhitneyCube> face_neighbors(const WhitneyCube& I) const;
  bool accepted(const WhitneyCube& c) const { return classify(c) == State::Accept; }

 private:
  enum class State { Accept, Split, Outside };
  State classify(const WhitneyCube& c) const;
  void descend(const WhitneyCube& c, const Box& region, int k_stop,
               const std::function<void(const WhitneyCube&)>& f) const;

  BoundaryPtr E_;
  Box window_;
  Side side_;
  WhitneyOptions opt_;
  int k_top_ = 0;
  std::vector<WhitneyCube> top_;
};

bool touching(const WhitneyCube& a, const WhitneyCube& b);
bool face_adjacent(const WhitneyCube& a, const WhitneyCube& b);

struct WhitneyCheck {
  double diam = 0, dist = 0, dist4 = 0;
  bool pass = false;  ///< 4 diam <= dist(4I) <= dist(I) <= 40 diam
};
WhitneyCheck whitney_check(const BoundaryModel& E, const WhitneyCube& I);

struct WhitneyReport {
  std::size_t cubes = 0;
  std::size_t violations_distance = 0;
  std::size_t violations_neighbor = 0;
  double min_ratio = kInf, max_ratio = 0;  ///< dist(I, E) / diam(I)
  double max_neighbor_ratio = 0;            ///< diam(J) / diam(I) over touching pairs
  bool pass() const { return violations_distance + violations_neighbor == 0; }
};
WhitneyReport verify_whitney(const WhitneyDecomposition& W, const Box& region, int k_stop);

constexpr double kLambda0 = 0.2;

/// (1 + lambda) I.
Box fatten(const WhitneyCube& I, double lambda);
void check_lambda(double lambda);

struct FatteningReport {
  std::size_t pairs = 0;
  std::size_t touching = 0;
  std::size_t violations_overlap = 0;  ///< fattened interiors meet iff the cubes touch
  double tau = 1.0;                    ///< sup of admissible tau: tau J misses I* for distinct I, J
  double min_gap = kInf;               ///< min dist(I**, E) / diam(I)
  bool pass = false;
};
FatteningReport pairwise_fattening_check(const BoundaryModel& E, const std::vector<WhitneyCube>& cubes,
                                         double lambda);

struct WqOptions {
  double c0 = 0.0;  ///< 0 selects the default for the constants mode
  int m0 = 2;
  bool paper_constants = false;

  double resolve_c0(int d) const;
};

/// I in W_Q: k(Q) - m0 <= k_I <= k(Q) + 1 and dist(I, Q) <= C0 l(Q).
bool in_w_q(const DyadicGrid& g, const WhitneyCube& I, const CubeRef& Q, const WqOptions& opt);
/// W_Q; throws ConfigError when empty.
std::vector<WhitneyCube> w_q(const DyadicGrid& g, const WhitneyDecomposition& W, const CubeRef& Q,
                             const WqOptions& opt = {});

}  // namespace rectilab
