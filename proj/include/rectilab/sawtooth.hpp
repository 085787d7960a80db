#pragma once

#include "rectilab/connectivity.hpp"
#include "rectilab/spatial_index.hpp"

namespace rectilab {

struct RegionOptions {
  WqOptions wq;
  double lambda = 0.05;
};

/// Union of closed boxes with the interior test used for every cube union:
/// inside an open box, or inside the closed union together with the 26 (3^d - 1)
/// neighbouring points at distance 1e-6 of the local side.
class BoxUnion {
 public:
  BoxUnion() = default;
  explicit BoxUnion(std::vector<Box> boxes);

  bool empty() const { return boxes_.empty(); }
  const std::vector<Box>& boxes() const { return boxes_; }
  Box bounds() const { return tree_.bounds(); }
  bool contains_closed(const Point& X) const;
  bool contains(const Point& X) const;

 private:
  std::vector<Box> boxes_;
  BoxTree tree_;
};

/// Interior test shared by the union oracles.
bool interior_by_directions(const Point& X, double eps, const std::function<bool(const Point&)>& closed);

/// Boundary faces of a union of axis-aligned boxes (d = 2 or 3).
std::vector<Box> union_boundary_faces(const std::vector<Box>& boxes);

struct WhitneyRegion {
  CubeRef Q;
  Point X_Q;
  double lambda = 0.05;
  std::vector<WhitneyCube> w;
  std::vector<WhitneyCube> w_star;
  int k_star = 0;          ///< max |k_I - k(Q)| over W*_Q
  double K0 = 0;           ///< max dist(I, Q) / l(Q) over W*_Q
  std::size_t chain_cubes = 0;
  std::size_t fallback_chains = 0;
  bool contains_xq = false;
  bool contains_children = false;
  bool chains_inside = false;  ///< every chain ball lies in U_Q
  BoxUnion u, u_star;

  bool in_u(const Point& X) const { return u.contains(X); }
  bool in_u_star(const Point& X) const { return u_star.contains(X); }
  nlohmann::json metadata() const;
};

/// W*_Q by chain tracing, with the regions U_Q and U_Q*.
WhitneyRegion whitney_region(const DyadicGrid& g, const WhitneyDecomposition& W, const CubeRef& Q,
                             const RegionOptions& opt = {});

enum class SawtoothKind { CarlesonBox, BallBox, Global, Local, Approx };
std::string to_string(SawtoothKind k);

using CubePredicate = std::function<bool(const CubeRef&)>;

/// int(union of fattened I over I in W_Q', Q' in a family of dyadic cubes).
/// Membership is decided lazily from the Whitney cube containing the point.
class SawtoothDomain {
 public:
  SawtoothDomain(GridPtr g, std::shared_ptr<const WhitneyDecomposition> W, SawtoothKind kind, CubePredicate member,
                 int k_lo, int k_hi, std::optional<Box> bounds, const RegionOptions& opt, bool doubled = false);

  SawtoothKind kind() const { return kind_; }
  const DyadicGrid& grid() const { return *g_; }
  const WhitneyDecomposition& whitney() const { return *W_; }
  double dilation() const { return 1.0 + (doubled_ ? 2.0 : 1.0) * opt_.lambda; }
  int k_lo() const { return k_lo_; }

  bool member(const CubeRef& Q) const { return member_(Q); }
  /// I belongs to W_Q' for some family cube Q'.
  bool belongs(const WhitneyCube& I) const;
  bool contains(const Point& X) const;
  /// Member Whitney cubes of generation <= k_stop.
  std::vector<WhitneyCube> members(int k_stop) const;
  Box reach() const;
  /// Explicit polyhedral model of the union of members up to generation k_stop.
  std::shared_ptr<PolyhedralBoundary> to_boundary(int k_stop) const;

 private:
  bool contains_closed(const Point& X, bool& open_hit) const;

  GridPtr g_;
  std::shared_ptr<const WhitneyDecomposition> W_;
  SawtoothKind kind_;
  CubePredicate member_;
  int k_lo_, k_hi_;
  std::optional<Box> bounds_;
  RegionOptions opt_;
  bool doubled_;
  double c0_;
};

using WhitneyPtr = std::shared_ptr<const WhitneyDecomposition>;

/// T_Q, or the fattened T~_Q when doubled.
SawtoothDomain carleson_box(GridPtr g, WhitneyPtr W, const CubeRef& Q, const RegionOptions& opt = {},
                            bool doubled = false);

struct BallBox {
  int k = 0;                   ///< k(Delta): 2^{-k-1} < 200 r <= 2^{-k}
  std::vector<CubeRef> cubes;  ///< D^Delta: generation k(Delta) cubes meeting 2 Delta
};
BallBox ball_box_cubes(const DyadicGrid& g, const Point& x, double r);
/// T_Delta.
SawtoothDomain carleson_box_ball(GridPtr g, WhitneyPtr W, const Point& x, double r, const RegionOptions& opt = {});

/// Omega_F, or Omega_{F,Q0}; throws ArgumentError when F is not pairwise disjoint.
SawtoothDomain sawtooth(GridPtr g, WhitneyPtr W, const std::vector<CubeRef>& F,
                        std::optional<CubeRef> Q0 = std::nullopt, const RegionOptions& opt = {});

/// Omega_N = Omega_{F_N} with F_N the generation-N cubes.
SawtoothDomain approx_domain(GridPtr g, WhitneyPtr W, int N, const RegionOptions& opt = {});
/// Polyhedral model of Omega_N (members of generation <= N).
std::shared_ptr<PolyhedralBoundary> approx_boundary(GridPtr g, WhitneyPtr W, int N, const RegionOptions& opt = {});

struct ContainmentReport {
  std::size_t samples = 0;
  std::size_t hits = 0;
  std::size_t counterexamples = 0;
  double kappa = 0;
  bool pass() const { return counterexamples == 0; }
};

/// Points of B cap Omega that miss D.
ContainmentReport ball_inside(const SawtoothDomain& D, const Ball& B, std::size_t n, std::uint64_t seed);
/// kappa from the members up to generation k_stop, then points of D outside
/// B(center, kappa scale) cap closure(Omega).
ContainmentReport inside_ball(const SawtoothDomain& D, const Point& center, double scale, int k_stop,
                              std::size_t n, std::uint64_t seed);

}  // namespace rectilab
