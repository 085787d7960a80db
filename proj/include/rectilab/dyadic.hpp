#pragma once

#include "rectilab/boundary.hpp"

#include <optional>
#include <set>

namespace rectilab {

/// One Christ cube. Members of sampled grids occupy the contiguous range
/// [begin, end) of the grid's sample cloud.
struct DyadicCube {
  int id = -1;
  int k = 0;
  int parent = -1;
  std::vector<int> children;
  Point center;
  double r = 0.0;      ///< inscribed radius: Delta(center, r) inside Q
  double outer = 0.0;  ///< Q inside Delta(center, outer)
  double sigma = 0.0;
  bool rim = false;
  std::size_t begin = 0, end = 0;
  Box region;  ///< exact square for flat grids, member bounding box otherwise

  double side() const { return std::ldexp(1.0, -k); }
};

/// Handle to a dyadic cube. Flat grids resolve cubes at any generation below
/// k_min arithmetically (id = -1 beyond k_max); sampled grids only the built levels.
struct CubeRef {
  int k = 0;
  int id = -1;
  Point center;
  Box region;

  double side() const { return std::ldexp(1.0, -k); }
  bool operator==(const CubeRef& o) const { return k == o.k && center == o.center; }
};

struct GridOptions {
  /// Sample spacing as a fraction of the finest side.
  double spacing_fraction = 0.25;
  /// Replaces the model's own window for unbounded boundaries.
  std::optional<Box> window;
  /// Claimed ADR constant checked before construction.
  double adr_constant = 100.0;
  std::uint64_t seed = 0;
};

struct GridReport {
  std::size_t cubes = 0;
  std::size_t violations_cover = 0;     // (i)
  std::size_t violations_nesting = 0;   // (ii)
  std::size_t violations_parent = 0;    // (iii)
  std::size_t violations_diameter = 0;  // (iv)
  std::size_t violations_ball = 0;      // (v)
  double c1 = 0.0;  ///< achieved sup diam(Q) / l(Q)
  double a0 = kInf; ///< achieved inf r(Q) / l(Q)
  double partition_error = 0.0;

  std::size_t violations() const {
    return violations_cover + violations_nesting + violations_parent + violations_diameter + violations_ball;
  }
};

class DyadicGrid {
 public:
  DyadicGrid(BoundaryPtr E, int k_min, int k_max, const GridOptions& opt = {});

  const BoundaryModel& boundary() const { return *E_; }
  BoundaryPtr boundary_ptr() const { return E_; }
  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }
  bool flat() const { return flat_; }
  std::size_t size() const { return cubes_.size(); }
  const DyadicCube& cube(int id) const;
  const std::vector<DyadicCube>& cubes() const { return cubes_; }
  const std::vector<int>& level(int k) const;
  const WeightedCloud& samples() const { return samples_; }
  const BoxTree& sample_index() const { return sample_tree_; }
  double spacing() const { return spacing_; }
  const Box& window() const { return window_; }

  /// Cube of generation k containing x (x on E), or -1.
  int locate(const Point& x, int k) const;
  /// dist(x, Q) for x anywhere in the ambient space.
  double distance_to_cube(int id, const Point& x) const;
  /// dist(box, Q).
  double distance_to_cube(int id, const Box& b) const;
  /// Weighted quadrature nodes on Q. Flat cubes use a midpoint grid of spacing
  /// about h; sampled cubes return their members.
  WeightedCloud quadrature(int id, double h) const;
  bool is_ancestor(int a, int q) const;

  CubeRef ref(int id) const;
  /// Whether generation k is available.
  bool resolves(int k) const { return k >= k_min_ && (flat_ || k <= k_max_); }
  /// Cube of generation k containing x (x on E).
  std::optional<CubeRef> ref_at(const Point& x, int k) const;
  /// Cubes of generation k with dist(Q, b) <= margin, optionally only those
  /// meeting clip.
  std::vector<CubeRef> cubes_near(const Box& b, int k, double margin, const Box* clip = nullptr) const;
  /// Same cubes handed to f in order; stops and returns true once f does.
  bool visit_near(const Box& b, int k, double margin, const Box* clip,
                  const std::function<bool(const CubeRef&)>& f) const;
  CubeRef ancestor(const CubeRef& q, int k) const;
  std::vector<CubeRef> children(const CubeRef& q) const;
  double distance(const CubeRef& q, const Box& b) const;
  double distance(const CubeRef& q, const Point& x) const;

  nlohmann::json to_json() const;

 private:
  void build_flat(const Box& base);
  void build_sampled(const WeightedCloud& cloud, const Box& lattice_base, bool lattice);
  void finish_sampled();

  BoundaryPtr E_;
  int k_min_, k_max_;
  bool flat_ = false;
  Box base_;  // flat grids: n-dimensional base window
  Box window_;
  double spacing_ = 0.0;
  WeightedCloud samples_;
  BoxTree sample_tree_;
  CubeRef flat_ref(int k, const std::vector<long long>& idx) const;

  std::vector<DyadicCube> cubes_;
  std::vector<std::vector<int>> levels_;
  std::vector<BoxTree> level_trees_;
};

using GridPtr = std::shared_ptr<const DyadicGrid>;

/// Builds a grid; flat hyperplanes (and clouds drawn from them) use exact
/// Euclidean squares, everything else the net-based construction.
GridPtr build_grid(BoundaryPtr E, int k_min, int k_max, const GridOptions& opt = {});

/// Properties (i)-(v) checked exhaustively against the given C1.
GridReport verify_grid(const DyadicGrid& g, double c1_claim = 4.0);

/// D_Q: Q and all its descendants.
std::vector<int> discretized_carleson(const DyadicGrid& g, int q);

/// D_F (or D_{F,Q0}); throws ArgumentError when F is not pairwise disjoint.
std::vector<int> discretized_sawtooth(const DyadicGrid& g, const std::vector<int>& family,
                                      std::optional<int> q0 = std::nullopt);

struct CubeBall {
  Ball ball;
  SurfaceBall surface;
  double containment = 0.0;  ///< achieved C with Q inside Delta(x_Q, C r)
};
CubeBall cube_ball(const DyadicGrid& g, int q);

/// sigma({x in Q : dist(x, E \ Q) <= tau l(Q)}) / sigma(Q).
double thin_boundary_check(const DyadicGrid& g, int q, double tau);

/// Delta(x_Q, tau0 r_Q) with tau0 = (2 C1^2)^{-1/n}.
struct Tau0Ball {
  double tau0 = 0.0;
  SurfaceBall ball;
  double sigma_ball = 0.0;
  double sigma_q = 0.0;
  double lower_bound = 0.0;  ///< (2 C1^4 C2^n)^{-1} sigma(Q)
  double upper_bound = 0.0;  ///< (3/4) sigma(Q)
  bool closure_inside = false;
  bool pass = false;
};
double tau0_formula(double c1, int n);
Tau0Ball tau0_ball(const DyadicGrid& g, int q, double c1, double c2);

}  // namespace rectilab
