#pragma once

#include "rectilab/spatial_index.hpp"
#include "rectilab/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rectilab {

/// Delta(x, r) = B(x, r) intersected with the boundary.
struct SurfaceBall {
  Point center;
  double radius = 0.0;
};

struct Projection {
  double distance = 0.0;
  Point foot;
};

/// Quadrature-ready sample of a boundary: points with sigma-weights.
struct WeightedCloud {
  std::vector<Point> points;
  std::vector<double> weights;
  double spacing = 0.0;

  std::size_t size() const { return points.size(); }
  double total_weight() const;
};

/// An n-dimensional closed set E = boundary of a domain, in R^{n+1}.
///
/// Every variant answers sigma of balls, nearest boundary points, and
/// membership in the associated open domain. Instances are immutable after
/// construction and safe for concurrent reads.
class BoundaryModel {
 public:
  explicit BoundaryModel(int ambient_dim);
  virtual ~BoundaryModel() = default;

  int ambient_dim() const { return d_; }
  int dim() const { return d_ - 1; }

  virtual std::string variant() const = 0;
  virtual double diameter() const = 0;

  /// H^n(E cap B(c, r)) for an arbitrary center c.
  virtual double measure_in_ball(const Point& c, double r) const = 0;
  virtual Projection project(const Point& x) const = 0;
  /// Membership in the open domain Omega whose boundary is E.
  virtual bool in_domain(const Point& x) const = 0;
  /// dist(box, E); zero when they meet.
  virtual double distance_to_box(const Box& b) const = 0;
  virtual WeightedCloud sample(double h, std::uint64_t seed) const = 0;
  /// Region of E used for sampling and statistics (whole set when bounded).
  virtual Box window() const = 0;
  virtual nlohmann::json to_json() const = 0;

  /// Tolerance for "on the boundary" tests at the given scale.
  virtual double boundary_tolerance(double scale) const;

  bool bounded() const { return std::isfinite(diameter()); }

 protected:
  int d_;
};

using BoundaryPtr = std::shared_ptr<const BoundaryModel>;

// ---------------------------------------------------------------------------
// Variants

/// The hyperplane {x_d = 0} bounding the upper half-space {x_d > 0}. With a
/// patch, E is restricted to patch x {0} (a flat piece); the domain is still the
/// upper half-space.
class HyperplaneBoundary final : public BoundaryModel {
 public:
  /// Infinite plane; window_half sets the sampling window [-w, w]^n.
  explicit HyperplaneBoundary(int ambient_dim, double window_half = 4.0);
  /// Flat patch [lo, hi] in the first n coordinates.
  HyperplaneBoundary(int ambient_dim, const Point& patch_lo, const Point& patch_hi);

  std::string variant() const override { return has_patch_ ? "hyperplane-patch" : "hyperplane"; }
  double diameter() const override;
  double measure_in_ball(const Point& c, double r) const override;
  Projection project(const Point& x) const override;
  bool in_domain(const Point& x) const override { return x(d_ - 1) > 0.0; }
  double distance_to_box(const Box& b) const override;
  WeightedCloud sample(double h, std::uint64_t seed) const override;
  Box window() const override;
  nlohmann::json to_json() const override;

  bool has_patch() const { return has_patch_; }
  /// Patch (or window) as an n-dimensional box.
  const Box& base_box() const { return base_; }

 private:
  bool has_patch_ = false;
  Box base_;
};

/// Sphere |x - c| = R in R^2 or R^3 bounding the open ball.
class SphereBoundary final : public BoundaryModel {
 public:
  SphereBoundary(int ambient_dim, const Point& center, double radius);
  std::string variant() const override { return "sphere"; }
  double diameter() const override { return 2.0 * radius_; }
  double measure_in_ball(const Point& c, double r) const override;
  Projection project(const Point& x) const override;
  bool in_domain(const Point& x) const override { return (x - center_).norm() < radius_; }
  double distance_to_box(const Box& b) const override;
  WeightedCloud sample(double h, std::uint64_t seed) const override;
  Box window() const override;
  nlohmann::json to_json() const override;

  const Point& center() const { return center_; }
  double radius() const { return radius_; }
  double total_area() const;

 private:
  Point center_;
  double radius_;
};

/// Graph t = phi(x_1) of a one-variable Lipschitz profile (constant in the
/// remaining base coordinates), bounding {t > phi}. Measure statistics use the
/// window [-w, w]^n of the base.
class GraphBoundary final : public BoundaryModel {
 public:
  enum class Profile { Tent, Sine };
  GraphBoundary(int ambient_dim, Profile profile, double amplitude, double frequency, double window_half);

  std::string variant() const override { return "lipschitz-graph"; }
  double diameter() const override { return kInf; }
  double measure_in_ball(const Point& c, double r) const override;
  Projection project(const Point& x) const override;
  bool in_domain(const Point& x) const override { return x(d_ - 1) > phi(x(0)); }
  double distance_to_box(const Box& b) const override;
  WeightedCloud sample(double h, std::uint64_t seed) const override;
  Box window() const override;
  nlohmann::json to_json() const override;

  double phi(double s) const;
  double dphi(double s) const;
  double lipschitz_constant() const;
  /// Exact area of the graph over the base window.
  double window_area() const;

 private:
  double curve_distance(double s, double px, double pt) const;
  double min_over_profile(double lo, double hi, const std::function<double(double)>& f) const;

  Profile profile_;
  double amplitude_, frequency_, window_half_;
};

/// Finite union of axis-aligned faces (closed hyper-rectangles with one
/// degenerate axis). Used for the boundaries of approximating domains.
class PolyhedralBoundary final : public BoundaryModel {
 public:
  using Membership = std::function<bool(const Point&)>;

  /// When membership is empty, a ray-parity test over the faces is used,
  /// which assumes the faces form a closed surface.
  PolyhedralBoundary(int ambient_dim, std::vector<Box> faces, Membership membership = {});

  std::string variant() const override { return "polyhedral"; }
  double diameter() const override;
  double measure_in_ball(const Point& c, double r) const override;
  Projection project(const Point& x) const override;
  bool in_domain(const Point& x) const override;
  double distance_to_box(const Box& b) const override;
  WeightedCloud sample(double h, std::uint64_t seed) const override;
  Box window() const override { return tree_.bounds(); }
  nlohmann::json to_json() const override;

  const std::vector<Box>& faces() const { return faces_; }
  int normal_axis(std::size_t face) const { return normals_[face]; }
  double total_area() const;

 private:
  bool parity_inside(const Point& x) const;

  std::vector<Box> faces_;
  std::vector<int> normals_;
  BoxTree tree_;
  Membership membership_;
};

/// Planar four-corner Cantor set at generation m, realised as 4^m horizontal
/// segments of length 4^-m through the centres of the generation-m squares.
/// Total length is 1 at every depth; the domain is the complement.
class CantorBoundary final : public BoundaryModel {
 public:
  explicit CantorBoundary(int depth);

  std::string variant() const override { return "four-corner-cantor"; }
  double diameter() const override { return diameter_; }
  double measure_in_ball(const Point& c, double r) const override;
  Projection project(const Point& x) const override;
  bool in_domain(const Point& x) const override;
  double distance_to_box(const Box& b) const override;
  WeightedCloud sample(double h, std::uint64_t seed) const override;
  Box window() const override { return tree_.bounds(); }
  nlohmann::json to_json() const override;

  int depth() const { return depth_; }
  double segment_length() const { return seg_len_; }
  /// Left endpoints, ordered so that blocks of 4^j consecutive segments form
  /// the generation-(m-j) squares.
  const std::vector<Point>& left_ends() const { return left_; }
  /// Lower-left corner of generation-g square number i (0 <= i < 4^g).
  Point square_corner(int generation, std::size_t i) const;

 private:
  int depth_;
  double seg_len_;
  double diameter_;
  std::vector<Point> left_;
  BoxTree tree_;
};

/// Weighted samples of a boundary, optionally tied to the analytic model they
/// were drawn from (which then answers domain membership and diameter).
class PointCloudBoundary final : public BoundaryModel {
 public:
  PointCloudBoundary(WeightedCloud cloud, BoundaryPtr parent = nullptr);

  std::string variant() const override { return "point-cloud"; }
  double diameter() const override;
  double measure_in_ball(const Point& c, double r) const override;
  Projection project(const Point& x) const override;
  bool in_domain(const Point& x) const override;
  double distance_to_box(const Box& b) const override;
  WeightedCloud sample(double h, std::uint64_t seed) const override;
  Box window() const override { return tree_.bounds(); }
  nlohmann::json to_json() const override;
  double boundary_tolerance(double) const override { return 0.5 * cloud_.spacing; }

  const WeightedCloud& cloud() const { return cloud_; }
  const BoxTree& index() const { return tree_; }
  const BoundaryPtr& parent() const { return parent_; }
  /// Indices of samples inside the open ball B(c, r).
  std::vector<std::size_t> members(const Point& c, double r) const;
  /// Index of the nearest sample (lexicographic tie-break).
  std::size_t nearest_index(const Point& x) const;

 private:
  WeightedCloud cloud_;
  BoundaryPtr parent_;
  BoxTree tree_;
};

// ---------------------------------------------------------------------------
// Operations

/// sigma(Delta); throws DomainError when the center is off the boundary.
double sigma_of_ball(const BoundaryModel& E, const SurfaceBall& delta);

/// (delta(X), nearest boundary point).
Projection distance_to_boundary(const BoundaryModel& E, const Point& x);

struct AdrSample {
  Point center;
  double radius = 0.0;
  double ratio = 0.0;  ///< sigma(Delta(x, r)) / r^n
};

struct AdrReport {
  std::vector<AdrSample> samples;
  double worst_lower = kInf;
  double worst_upper = 0.0;
  double constant = 1.0;
  std::vector<AdrSample> violations;  ///< ratios outside [1/claimed, claimed]
};

/// Evaluates the ADR ratios on every (center, radius) pair.
AdrReport adr_check(const BoundaryModel& E, const std::vector<Point>& centers, const std::vector<double>& radii,
                    double claimed_constant = kInf);

/// Quasi-uniform weighted samples at spacing h; deterministic in seed.
WeightedCloud sample_boundary(const BoundaryModel& E, double h, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization: {"variant": ..., "params": {...}, "samples": [[[coords], w], ...]}

BoundaryPtr boundary_from_json(const nlohmann::json& j);
/// Builtins: plane, plane2d, plane-patch, sphere, circle, lipschitz-tent,
/// lipschitz-sine, cantor-<m>, halfspace-slit.
BoundaryPtr builtin_boundary(const std::string& name);
std::vector<std::string> builtin_boundary_names();
/// Either a builtin name or a path to a JSON document.
BoundaryPtr load_boundary(const std::string& name_or_path);

// ---------------------------------------------------------------------------
// Geometry helpers shared with other modules.

/// Area of the disk B((cx, cy), R) intersected with [x1, x2] x [y1, y2].
double disk_rectangle_area(double cx, double cy, double R, double x1, double x2, double y1, double y2);

/// Measure of B(c, r) intersected with an axis-aligned face (one degenerate axis).
double ball_face_measure(const Point& c, double r, const Box& face, int normal_axis);

/// Distance from x to the segment [a, b].
double point_segment_distance(const Point& x, const Point& a, const Point& b, Point* foot = nullptr);

/// Half-space with a vertical wall {x_1 = 0, 0 <= x_d <= height} inside a
/// finite window: the standard non-Harnack control case.
std::shared_ptr<PolyhedralBoundary> make_slit_halfspace(int ambient_dim, double window_half, double height);

}  // namespace rectilab
