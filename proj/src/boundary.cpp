#include "rectilab/boundary.hpp"

#include "rectilab/rng.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rectilab {

using nlohmann::json;

namespace {

json point_to_json(const Point& p) {
  json a = json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p(i));
  return a;
}

Point point_from_json(const json& a) {
  Point p(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) p(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return p;
}

// Integral of sqrt(R^2 - x^2).
double half_chord_primitive(double x, double R) {
  x = std::clamp(x, -R, R);
  return 0.5 * (x * std::sqrt(std::max(0.0, R * R - x * x)) + R * R * std::asin(x / R));
}

// Area of {x <= a, y <= b} inside the disk of radius R about the origin.
double disk_quadrant_area(double a, double b, double R) {
  if (R <= 0.0) return 0.0;
  double u = std::clamp(a, -R, R);
  if (u <= -R) return 0.0;
  auto two_h = [&](double p, double q) {
    return q > p ? 2.0 * (half_chord_primitive(q, R) - half_chord_primitive(p, R)) : 0.0;
  };
  auto h_plus_b = [&](double p, double q) {
    return q > p ? half_chord_primitive(q, R) - half_chord_primitive(p, R) + b * (q - p) : 0.0;
  };
  if (b >= R) return two_h(-R, u);
  if (b <= -R) return 0.0;
  double x0 = std::sqrt(R * R - b * b);
  if (b >= 0.0) {
    return two_h(-R, std::min(u, -x0)) + h_plus_b(-x0, std::min(u, x0)) + two_h(x0, u);
  }
  return h_plus_b(-x0, std::min(u, x0));
}

Point lex_min_direction(int d) {
  Point p = Point::Zero(d);
  p(0) = -1.0;
  return p;
}

// Golden-section refinement of a unimodal bracket.
double golden_min(const std::function<double(double)>& f, double a, double b, int iters = 80) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters && b - a > 1e-15 * (1.0 + std::abs(a)); ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

std::vector<Box> segment_boxes(const std::vector<Point>& left, double len) {
  std::vector<Box> boxes;
  boxes.reserve(left.size());
  for (const Point& p : left) {
    Point q = p;
    q(0) += len;
    boxes.push_back({p, q});
  }
  return boxes;
}

std::vector<Box> point_boxes(const std::vector<Point>& pts) {
  std::vector<Box> boxes;
  boxes.reserve(pts.size());
  for (const Point& p : pts) boxes.push_back({p, p});
  return boxes;
}

}  // namespace

// ---------------------------------------------------------------------------

double disk_rectangle_area(double cx, double cy, double R, double x1, double x2, double y1, double y2) {
  if (R <= 0.0 || x2 <= x1 || y2 <= y1) return 0.0;
  x1 -= cx;
  x2 -= cx;
  y1 -= cy;
  y2 -= cy;
  double a = disk_quadrant_area(x2, y2, R) - disk_quadrant_area(x1, y2, R) - disk_quadrant_area(x2, y1, R) +
             disk_quadrant_area(x1, y1, R);
  return std::max(0.0, a);
}

double ball_face_measure(const Point& c, double r, const Box& face, int normal_axis) {
  const int d = face.dim();
  double dz = c(normal_axis) - face.lo(normal_axis);
  double rho2 = r * r - dz * dz;
  if (rho2 <= 0.0) return 0.0;
  double rho = std::sqrt(rho2);
  if (d == 2) {
    int i = 1 - normal_axis;
    double lo = std::max(face.lo(i), c(i) - rho), hi = std::min(face.hi(i), c(i) + rho);
    return std::max(0.0, hi - lo);
  }
  if (d == 3) {
    int i = (normal_axis + 1) % 3, j = (normal_axis + 2) % 3;
    return disk_rectangle_area(c(i), c(j), rho, face.lo(i), face.hi(i), face.lo(j), face.hi(j));
  }
  throw ArgumentError("ball_face_measure: ambient dimension must be 2 or 3");
}

double point_segment_distance(const Point& x, const Point& a, const Point& b, Point* foot) {
  Point ab = b - a;
  double L2 = ab.squaredNorm();
  double s = L2 > 0.0 ? std::clamp((x - a).dot(ab) / L2, 0.0, 1.0) : 0.0;
  Point f = a + s * ab;
  if (foot) *foot = f;
  return (x - f).norm();
}

double WeightedCloud::total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

BoundaryModel::BoundaryModel(int ambient_dim) : d_(ambient_dim) {
  if (ambient_dim < 2 || ambient_dim > kMaxDim)
    throw ArgumentError("ambient dimension must lie in [2, " + std::to_string(kMaxDim) + "]");
}

double BoundaryModel::boundary_tolerance(double scale) const { return 1e-9 * std::max(1.0, scale); }

// ---------------------------------------------------------------------------
// Hyperplane

HyperplaneBoundary::HyperplaneBoundary(int ambient_dim, double window_half) : BoundaryModel(ambient_dim) {
  if (!(window_half > 0.0)) throw ArgumentError("hyperplane window must be positive");
  base_ = Box::around(Point::Zero(ambient_dim - 1), window_half);
}

HyperplaneBoundary::HyperplaneBoundary(int ambient_dim, const Point& patch_lo, const Point& patch_hi)
    : BoundaryModel(ambient_dim), has_patch_(true), base_{patch_lo, patch_hi} {
  if (patch_lo.size() != ambient_dim - 1 || patch_hi.size() != ambient_dim - 1)
    throw ArgumentError("hyperplane patch must have n = d - 1 coordinates");
  if ((patch_hi.array() <= patch_lo.array()).any()) throw ArgumentError("hyperplane patch is empty");
  if (ambient_dim > 3) throw ArgumentError("hyperplane patches are supported for d <= 3");
}

double HyperplaneBoundary::diameter() const { return has_patch_ ? base_.diameter() : kInf; }

double HyperplaneBoundary::measure_in_ball(const Point& c, double r) const {
  const int n = dim();
  double t = c(d_ - 1);
  double rho2 = r * r - t * t;
  if (rho2 <= 0.0) return 0.0;
  double rho = std::sqrt(rho2);
  if (!has_patch_) return unit_ball_volume(n) * std::pow(rho, n);
  if (n == 1) return std::max(0.0, std::min(base_.hi(0), c(0) + rho) - std::max(base_.lo(0), c(0) - rho));
  return disk_rectangle_area(c(0), c(1), rho, base_.lo(0), base_.hi(0), base_.lo(1), base_.hi(1));
}

Projection HyperplaneBoundary::project(const Point& x) const {
  Point foot = x;
  foot(d_ - 1) = 0.0;
  if (has_patch_) foot.head(d_ - 1) = base_.clamp(x.head(d_ - 1));
  return {(x - foot).norm(), foot};
}

double HyperplaneBoundary::distance_to_box(const Box& b) const {
  double lo = b.lo(d_ - 1), hi = b.hi(d_ - 1);
  double gt = lo > 0.0 ? lo : (hi < 0.0 ? -hi : 0.0);
  if (!has_patch_) return gt;
  Box base{b.lo.head(d_ - 1), b.hi.head(d_ - 1)};
  double gb = base.distance(base_);
  return std::hypot(gt, gb);
}

WeightedCloud HyperplaneBoundary::sample(double h, std::uint64_t) const {
  const int n = dim();
  std::vector<int> counts(n);
  std::vector<double> steps(n);
  double w = 1.0;
  for (int i = 0; i < n; ++i) {
    double ext = base_.hi(i) - base_.lo(i);
    counts[i] = std::max(1, static_cast<int>(std::lround(ext / h)));
    steps[i] = ext / counts[i];
    w *= steps[i];
  }
  WeightedCloud out;
  out.spacing = *std::max_element(steps.begin(), steps.end());
  std::vector<int> idx(n, 0);
  while (true) {
    Point p = Point::Zero(d_);
    for (int i = 0; i < n; ++i) p(i) = base_.lo(i) + (idx[i] + 0.5) * steps[i];
    out.points.push_back(p);
    out.weights.push_back(w);
    int k = 0;
    while (k < n && ++idx[k] == counts[k]) idx[k++] = 0;
    if (k == n) break;
  }
  return out;
}

Box HyperplaneBoundary::window() const {
  Point lo = Point::Zero(d_), hi = Point::Zero(d_);
  lo.head(d_ - 1) = base_.lo;
  hi.head(d_ - 1) = base_.hi;
  return {lo, hi};
}

json HyperplaneBoundary::to_json() const {
  json p{{"dim", d_}};
  if (has_patch_) {
    p["patch_lo"] = point_to_json(base_.lo);
    p["patch_hi"] = point_to_json(base_.hi);
  } else {
    p["window_half"] = base_.hi(0);
  }
  return {{"variant", variant()}, {"params", p}};
}

// ---------------------------------------------------------------------------
// Sphere

SphereBoundary::SphereBoundary(int ambient_dim, const Point& center, double radius)
    : BoundaryModel(ambient_dim), center_(center), radius_(radius) {
  if (ambient_dim > 3) throw ArgumentError("sphere model supports d = 2 or 3");
  if (!(radius > 0.0)) throw ArgumentError("sphere radius must be positive");
  if (center.size() != ambient_dim) throw ArgumentError("sphere center has wrong dimension");
}

double SphereBoundary::total_area() const {
  return d_ == 3 ? 4.0 * kPi * radius_ * radius_ : 2.0 * kPi * radius_;
}

double SphereBoundary::measure_in_ball(const Point& c, double r) const {
  if (r <= 0.0) return 0.0;
  double D = (c - center_).norm();
  const double R = radius_;
  if (D < 1e-15 * R) return r > R ? total_area() : 0.0;
  double cos0 = std::clamp((R * R + D * D - r * r) / (2.0 * R * D), -1.0, 1.0);
  if (d_ == 3) return 2.0 * kPi * R * R * (1.0 - cos0);
  return 2.0 * R * std::acos(cos0);
}

Projection SphereBoundary::project(const Point& x) const {
  Point v = x - center_;
  double n = v.norm();
  Point dir = n > 1e-300 ? Point(v / n) : lex_min_direction(d_);
  Point foot = center_ + radius_ * dir;
  return {std::abs(n - radius_), foot};
}

double SphereBoundary::distance_to_box(const Box& b) const {
  double dmin = b.distance(center_), dmax = b.max_distance(center_);
  if (dmin >= radius_) return dmin - radius_;
  if (dmax <= radius_) return radius_ - dmax;
  return 0.0;
}

WeightedCloud SphereBoundary::sample(double h, std::uint64_t seed) const {
  Rng rng(seed);
  WeightedCloud out;
  if (d_ == 3) {
    int N = std::max(8, static_cast<int>(std::lround(total_area() / (h * h))));
    // Deterministic random rotation so different seeds give different point sets.
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    Eigen::Matrix3d rot = Eigen::AngleAxisd(rng.uniform(0.0, 2.0 * kPi), axis).toRotationMatrix();
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < N; ++i) {
      double z = 1.0 - (2.0 * i + 1.0) / N;
      double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      double th = golden * i;
      Eigen::Vector3d u(rho * std::cos(th), rho * std::sin(th), z);
      u = rot * u;
      Point p = center_ + radius_ * Point(u);
      out.points.push_back(p);
      out.weights.push_back(total_area() / N);
    }
    out.spacing = std::sqrt(total_area() / N);
  } else {
    int N = std::max(8, static_cast<int>(std::lround(total_area() / h)));
    double off = rng.uniform(0.0, 2.0 * kPi / N);
    for (int i = 0; i < N; ++i) {
      double th = off + 2.0 * kPi * i / N;
      out.points.push_back(center_ + radius_ * make_point({std::cos(th), std::sin(th)}));
      out.weights.push_back(total_area() / N);
    }
    out.spacing = total_area() / N;
  }
  return out;
}

Box SphereBoundary::window() const { return Box::around(center_, radius_); }

json SphereBoundary::to_json() const {
  return {{"variant", variant()},
          {"params", {{"dim", d_}, {"center", point_to_json(center_)}, {"radius", radius_}}}};
}

// ---------------------------------------------------------------------------
// Lipschitz graph

GraphBoundary::GraphBoundary(int ambient_dim, Profile profile, double amplitude, double frequency,
                             double window_half)
    : BoundaryModel(ambient_dim),
      profile_(profile),
      amplitude_(amplitude),
      frequency_(frequency),
      window_half_(window_half) {
  if (ambient_dim > 3) throw ArgumentError("graph model supports d = 2 or 3");
  if (!(window_half > 0.0)) throw ArgumentError("graph window must be positive");
}

double GraphBoundary::phi(double s) const {
  return profile_ == Profile::Tent ? amplitude_ * std::abs(s) : amplitude_ * std::sin(frequency_ * s);
}

double GraphBoundary::dphi(double s) const {
  if (profile_ == Profile::Tent) return s > 0 ? amplitude_ : (s < 0 ? -amplitude_ : 0.0);
  return amplitude_ * frequency_ * std::cos(frequency_ * s);
}

double GraphBoundary::lipschitz_constant() const {
  return profile_ == Profile::Tent ? std::abs(amplitude_) : std::abs(amplitude_ * frequency_);
}

double GraphBoundary::window_area() const {
  const double W = window_half_;
  double len = 0.0;
  if (profile_ == Profile::Tent) {
    len = 2.0 * W * std::sqrt(1.0 + amplitude_ * amplitude_);
  } else {
    const int M = 20000;
    for (int i = 0; i < M; ++i) {
      double s = -W + (i + 0.5) * 2.0 * W / M;
      len += std::sqrt(1.0 + dphi(s) * dphi(s)) * 2.0 * W / M;
    }
  }
  return len * std::pow(2.0 * W, dim() - 1);
}

double GraphBoundary::measure_in_ball(const Point& c, double r) const {
  const double W = window_half_;
  double a = std::max(-W, c(0) - r), b = std::min(W, c(0) + r);
  if (b <= a) return 0.0;
  const int M = 4000;
  double ds = (b - a) / M, total = 0.0;
  for (int i = 0; i < M; ++i) {
    double s = a + (i + 0.5) * ds;
    double rho2 = r * r - (s - c(0)) * (s - c(0)) - (phi(s) - c(d_ - 1)) * (phi(s) - c(d_ - 1));
    if (rho2 <= 0.0) continue;
    double jac = std::sqrt(1.0 + dphi(s) * dphi(s));
    if (d_ == 2) {
      total += jac * ds;
    } else {
      double rho = std::sqrt(rho2);
      double len = std::min(W, c(1) + rho) - std::max(-W, c(1) - rho);
      if (len > 0.0) total += jac * len * ds;
    }
  }
  return total;
}

double GraphBoundary::curve_distance(double s, double px, double pt) const {
  return std::hypot(s - px, phi(s) - pt);
}

double GraphBoundary::min_over_profile(double lo, double hi, const std::function<double(double)>& f) const {
  const int M = 400;
  double step = (hi - lo) / M, best_s = lo, best = f(lo);
  for (int i = 1; i <= M; ++i) {
    double s = lo + i * step;
    double v = f(s);
    if (v < best) {
      best = v;
      best_s = s;
    }
  }
  double s = golden_min(f, std::max(lo, best_s - step), std::min(hi, best_s + step));
  // Kink of the tent profile is a candidate minimiser of its own.
  double cand = f(s) <= best ? s : best_s;
  if (profile_ == Profile::Tent && lo <= 0.0 && hi >= 0.0 && f(0.0) < f(cand)) cand = 0.0;
  return cand;
}

Projection GraphBoundary::project(const Point& x) const {
  double px = x(0), pt = x(d_ - 1);
  double D = std::abs(pt - phi(px));
  double s = D == 0.0 ? px : min_over_profile(px - D, px + D, [&](double u) { return curve_distance(u, px, pt); });
  Point foot = x;
  foot(0) = s;
  foot(d_ - 1) = phi(s);
  return {(x - foot).norm(), foot};
}

double GraphBoundary::distance_to_box(const Box& b) const {
  double l0 = b.lo(0), h0 = b.hi(0), lt = b.lo(d_ - 1), ht = b.hi(d_ - 1);
  auto rect_dist = [&](double s) {
    double y = phi(s);
    double gx = std::max({0.0, l0 - s, s - h0});
    double gy = std::max({0.0, lt - y, y - ht});
    return std::hypot(gx, gy);
  };
  double mid = 0.5 * (l0 + h0);
  double D = rect_dist(mid);
  if (D == 0.0) return 0.0;
  double s = min_over_profile(l0 - D, h0 + D, rect_dist);
  return rect_dist(s);
}

WeightedCloud GraphBoundary::sample(double h, std::uint64_t) const {
  const double W = window_half_;
  int cnt = std::max(1, static_cast<int>(std::lround(2.0 * W / h)));
  double step = 2.0 * W / cnt;
  WeightedCloud out;
  out.spacing = step;
  const int n = dim();
  std::vector<int> idx(n, 0);
  while (true) {
    Point p = Point::Zero(d_);
    for (int i = 0; i < n; ++i) p(i) = -W + (idx[i] + 0.5) * step;
    p(d_ - 1) = phi(p(0));
    out.points.push_back(p);
    out.weights.push_back(std::pow(step, n) * std::sqrt(1.0 + dphi(p(0)) * dphi(p(0))));
    int k = 0;
    while (k < n && ++idx[k] == cnt) idx[k++] = 0;
    if (k == n) break;
  }
  return out;
}

Box GraphBoundary::window() const {
  Point lo = Point::Constant(d_, -window_half_), hi = Point::Constant(d_, window_half_);
  double pmax = profile_ == Profile::Tent ? std::abs(amplitude_) * window_half_ : std::abs(amplitude_);
  lo(d_ - 1) = -pmax;
  hi(d_ - 1) = pmax;
  return {lo, hi};
}

json GraphBoundary::to_json() const {
  return {{"variant", variant()},
          {"params",
           {{"dim", d_},
            {"profile", profile_ == Profile::Tent ? "tent" : "sine"},
            {"amplitude", amplitude_},
            {"frequency", frequency_},
            {"window_half", window_half_}}}};
}

// ---------------------------------------------------------------------------
// Polyhedral

PolyhedralBoundary::PolyhedralBoundary(int ambient_dim, std::vector<Box> faces, Membership membership)
    : BoundaryModel(ambient_dim), faces_(std::move(faces)), membership_(std::move(membership)) {
  if (ambient_dim > 3) throw ArgumentError("polyhedral model supports d = 2 or 3");
  if (faces_.empty()) throw ArgumentError("polyhedral boundary needs at least one face");
  normals_.reserve(faces_.size());
  for (const Box& f : faces_) {
    int axis = -1;
    for (int i = 0; i < ambient_dim; ++i)
      if (f.lo(i) == f.hi(i)) axis = i;
    if (axis < 0) throw ArgumentError("polyhedral face is not degenerate along any axis");
    normals_.push_back(axis);
  }
  tree_ = BoxTree(faces_);
}

double PolyhedralBoundary::diameter() const { return tree_.bounds().diameter(); }

double PolyhedralBoundary::total_area() const {
  double a = 0.0;
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    double f = 1.0;
    for (int k = 0; k < d_; ++k)
      if (k != normals_[i]) f *= faces_[i].hi(k) - faces_[i].lo(k);
    a += f;
  }
  return a;
}

double PolyhedralBoundary::measure_in_ball(const Point& c, double r) const {
  double total = 0.0;
  tree_.query_ball(c, r, [&](std::size_t i) { total += ball_face_measure(c, r, faces_[i], normals_[i]); });
  return total;
}

Projection PolyhedralBoundary::project(const Point& x) const {
  auto [i, dist] = tree_.minimize([&](const Box& b) { return b.distance(x); },
                                  [&](std::size_t k) { return faces_[k].distance(x); },
                                  [&](std::size_t a, std::size_t b) {
                                    return lex_less(faces_[a].clamp(x), faces_[b].clamp(x));
                                  });
  return {dist, faces_[i].clamp(x)};
}

bool PolyhedralBoundary::in_domain(const Point& x) const {
  if (project(x).distance <= 0.0) return false;
  return membership_ ? membership_(x) : parity_inside(x);
}

bool PolyhedralBoundary::parity_inside(const Point& x) const {
  // Generic direction so the ray avoids face edges of dyadic geometry.
  Point v(d_);
  const double tilt[] = {1.0, 0.000123456789 * std::sqrt(2.0), 0.000271828183 * kPi, 0.000161803399};
  for (int i = 0; i < d_; ++i) v(i) = tilt[i];
  v.normalize();
  int hits = 0;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    int k = normals_[f];
    double s = (faces_[f].lo(k) - x(k)) / v(k);
    if (s <= 0.0) continue;
    Point p = x + s * v;
    p(k) = faces_[f].lo(k);
    if (faces_[f].contains(p)) ++hits;
  }
  return hits % 2 == 1;
}

double PolyhedralBoundary::distance_to_box(const Box& b) const {
  return tree_.minimize([&](const Box& nb) { return nb.distance(b); },
                        [&](std::size_t k) { return faces_[k].distance(b); })
      .second;
}

WeightedCloud PolyhedralBoundary::sample(double h, std::uint64_t) const {
  WeightedCloud out;
  out.spacing = h;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Box& F = faces_[f];
    std::vector<int> axes, counts;
    std::vector<double> steps;
    double w = 1.0;
    for (int k = 0; k < d_; ++k) {
      if (k == normals_[f]) continue;
      double ext = F.hi(k) - F.lo(k);
      int c = std::max(1, static_cast<int>(std::lround(ext / h)));
      axes.push_back(k);
      counts.push_back(c);
      steps.push_back(ext / c);
      w *= ext / c;
    }
    std::vector<int> idx(axes.size(), 0);
    while (true) {
      Point p = F.lo;
      for (std::size_t a = 0; a < axes.size(); ++a) p(axes[a]) = F.lo(axes[a]) + (idx[a] + 0.5) * steps[a];
      out.points.push_back(p);
      out.weights.push_back(w);
      std::size_t k = 0;
      while (k < axes.size() && ++idx[k] == counts[k]) idx[k++] = 0;
      if (k == axes.size()) break;
    }
  }
  return out;
}

json PolyhedralBoundary::to_json() const {
  json faces = json::array();
  for (const Box& f : faces_) faces.push_back({point_to_json(f.lo), point_to_json(f.hi)});
  return {{"variant", variant()}, {"params", {{"dim", d_}, {"faces", faces}}}};
}

std::shared_ptr<PolyhedralBoundary> make_slit_halfspace(int ambient_dim, double window_half, double height) {
  const int d = ambient_dim;
  std::vector<Box> faces;
  Point lo = Point::Constant(d, -window_half), hi = Point::Constant(d, window_half);
  lo(d - 1) = 0.0;
  hi(d - 1) = 0.0;
  faces.push_back({lo, hi});
  Point wlo = Point::Constant(d, -window_half), whi = Point::Constant(d, window_half);
  wlo(0) = whi(0) = 0.0;
  wlo(d - 1) = 0.0;
  whi(d - 1) = height;
  faces.push_back({wlo, whi});
  auto member = [d, height](const Point& x) { return x(d - 1) > 0.0 && !(x(0) == 0.0 && x(d - 1) <= height); };
  return std::make_shared<PolyhedralBoundary>(d, std::move(faces), member);
}

// ---------------------------------------------------------------------------
// Four-corner Cantor set

CantorBoundary::CantorBoundary(int depth) : BoundaryModel(2), depth_(depth) {
  if (depth < 0 || depth > 9) throw ArgumentError("cantor depth must lie in [0, 9]");
  seg_len_ = std::pow(4.0, -depth);
  std::size_t count = std::size_t{1} << (2 * depth);
  left_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Point c = square_corner(depth, i);
    c(1) += 0.5 * seg_len_;
    left_.push_back(c);
  }
  tree_ = BoxTree(segment_boxes(left_, seg_len_));
  diameter_ = std::hypot(1.0, 1.0 - seg_len_);
}

Point CantorBoundary::square_corner(int generation, std::size_t i) const {
  Point p = Point::Zero(2);
  double side = 1.0;
  for (int g = generation - 1; g >= 0; --g) {
    std::size_t digit = (i >> (2 * g)) & 3u;
    side *= 0.25;
    p(0) += (digit & 1u) ? 3.0 * side : 0.0;
    p(1) += (digit & 2u) ? 3.0 * side : 0.0;
  }
  return p;
}

double CantorBoundary::measure_in_ball(const Point& c, double r) const {
  double total = 0.0;
  tree_.query_ball(c, r, [&](std::size_t i) {
    double dy = left_[i](1) - c(1);
    double rho2 = r * r - dy * dy;
    if (rho2 <= 0.0) return;
    double rho = std::sqrt(rho2);
    double lo = std::max(left_[i](0), c(0) - rho), hi = std::min(left_[i](0) + seg_len_, c(0) + rho);
    total += std::max(0.0, hi - lo);
  });
  return total;
}

Projection CantorBoundary::project(const Point& x) const {
  auto foot_of = [&](std::size_t i) { return tree_.box(i).clamp(x); };
  auto [i, dist] = tree_.minimize([&](const Box& b) { return b.distance(x); },
                                  [&](std::size_t k) { return tree_.box(k).distance(x); },
                                  [&](std::size_t a, std::size_t b) { return lex_less(foot_of(a), foot_of(b)); });
  return {dist, foot_of(i)};
}

bool CantorBoundary::in_domain(const Point& x) const { return project(x).distance > 0.0; }

double CantorBoundary::distance_to_box(const Box& b) const {
  return tree_.minimize([&](const Box& nb) { return nb.distance(b); },
                        [&](std::size_t k) { return tree_.box(k).distance(b); })
      .second;
}

WeightedCloud CantorBoundary::sample(double h, std::uint64_t) const {
  WeightedCloud out;
  int per = std::max(1, static_cast<int>(std::lround(seg_len_ / h)));
  out.spacing = seg_len_ / per;
  for (const Point& p : left_) {
    for (int k = 0; k < per; ++k) {
      Point q = p;
      q(0) += (k + 0.5) * seg_len_ / per;
      out.points.push_back(q);
      out.weights.push_back(seg_len_ / per);
    }
  }
  return out;
}

json CantorBoundary::to_json() const { return {{"variant", variant()}, {"params", {{"depth", depth_}}}}; }

// ---------------------------------------------------------------------------
// Point cloud

PointCloudBoundary::PointCloudBoundary(WeightedCloud cloud, BoundaryPtr parent)
    : BoundaryModel(cloud.points.empty() ? 2 : static_cast<int>(cloud.points.front().size())),
      cloud_(std::move(cloud)),
      parent_(std::move(parent)) {
  if (cloud_.points.empty()) throw ArgumentError("point cloud is empty");
  if (cloud_.points.size() != cloud_.weights.size()) throw ArgumentError("point cloud weights/points mismatch");
  tree_ = BoxTree(point_boxes(cloud_.points), 16);
}

double PointCloudBoundary::diameter() const { return parent_ ? parent_->diameter() : tree_.bounds().diameter(); }

std::vector<std::size_t> PointCloudBoundary::members(const Point& c, double r) const {
  std::vector<std::size_t> out;
  tree_.query_ball(c, r, [&](std::size_t i) {
    if ((cloud_.points[i] - c).norm() < r) out.push_back(i);
  });
  std::sort(out.begin(), out.end());
  return out;
}

double PointCloudBoundary::measure_in_ball(const Point& c, double r) const {
  double total = 0.0;
  tree_.query_ball(c, r, [&](std::size_t i) {
    if ((cloud_.points[i] - c).norm() < r) total += cloud_.weights[i];
  });
  return total;
}

std::size_t PointCloudBoundary::nearest_index(const Point& x) const {
  return tree_
      .minimize([&](const Box& b) { return b.distance(x); },
                [&](std::size_t k) { return (cloud_.points[k] - x).norm(); },
                [&](std::size_t a, std::size_t b) { return lex_less(cloud_.points[a], cloud_.points[b]); })
      .first;
}

Projection PointCloudBoundary::project(const Point& x) const {
  std::size_t i = nearest_index(x);
  return {(cloud_.points[i] - x).norm(), cloud_.points[i]};
}

bool PointCloudBoundary::in_domain(const Point& x) const {
  if (parent_) return parent_->in_domain(x);
  return project(x).distance > 0.5 * cloud_.spacing;
}

double PointCloudBoundary::distance_to_box(const Box& b) const {
  return tree_.minimize([&](const Box& nb) { return nb.distance(b); },
                        [&](std::size_t k) { return b.distance(cloud_.points[k]); })
      .second;
}

WeightedCloud PointCloudBoundary::sample(double h, std::uint64_t) const {
  if (h < cloud_.spacing) throw ArgumentError("point cloud cannot be resampled below its own spacing");
  return cloud_;
}

json PointCloudBoundary::to_json() const {
  json samples = json::array();
  for (std::size_t i = 0; i < cloud_.size(); ++i) samples.push_back({point_to_json(cloud_.points[i]), cloud_.weights[i]});
  json p{{"dim", d_}, {"spacing", cloud_.spacing}};
  if (parent_) p["parent"] = parent_->to_json();
  return {{"variant", variant()}, {"params", p}, {"samples", samples}};
}

// ---------------------------------------------------------------------------
// Operations

double sigma_of_ball(const BoundaryModel& E, const SurfaceBall& delta) {
  if (delta.radius < 0.0 || !std::isfinite(delta.radius)) throw ArgumentError("surface ball radius must be >= 0");
  Projection pr = E.project(delta.center);
  double tol = E.boundary_tolerance(std::max(delta.radius, delta.center.norm()));
  if (pr.distance > tol)
    throw DomainError("surface ball center lies off the boundary (distance " + std::to_string(pr.distance) + ")");
  if (delta.radius == 0.0) return 0.0;
  return E.measure_in_ball(delta.center, delta.radius);
}

Projection distance_to_boundary(const BoundaryModel& E, const Point& x) {
  if (x.size() != E.ambient_dim()) throw ArgumentError("point has wrong dimension");
  return E.project(x);
}

AdrReport adr_check(const BoundaryModel& E, const std::vector<Point>& centers, const std::vector<double>& radii,
                    double claimed_constant) {
  if (centers.empty() || radii.empty()) throw ArgumentError("adr_check needs non-empty centers and radii");
  const double diam = E.diameter();
  for (double r : radii)
    if (!(r > 0.0) || r > diam) throw ArgumentError("adr_check radius outside (0, diam E]");
  AdrReport rep;
  const int n = E.dim();
  for (const Point& x : centers) {
    for (double r : radii) {
      double s = sigma_of_ball(E, {x, r});
      AdrSample smp{x, r, s / std::pow(r, n)};
      rep.worst_lower = std::min(rep.worst_lower, smp.ratio);
      rep.worst_upper = std::max(rep.worst_upper, smp.ratio);
      if (smp.ratio > claimed_constant || smp.ratio < 1.0 / claimed_constant) rep.violations.push_back(smp);
      rep.samples.push_back(std::move(smp));
    }
  }
  rep.constant = std::max({1.0, rep.worst_upper, rep.worst_lower > 0.0 ? 1.0 / rep.worst_lower : kInf});
  return rep;
}

WeightedCloud sample_boundary(const BoundaryModel& E, double h, std::uint64_t seed) {
  if (!(h > 0.0)) throw ArgumentError("sample spacing must be positive");
  double extent = E.bounded() ? E.diameter() : E.window().diameter();
  if (h > extent) throw ArgumentError("sample spacing exceeds the boundary diameter");
  return E.sample(h, seed);
}

// ---------------------------------------------------------------------------
// Serialization

BoundaryPtr boundary_from_json(const json& j) {
  if (!j.contains("variant")) throw ConfigError("boundary document: missing 'variant'");
  std::string v = j.at("variant").get<std::string>();
  json p = j.value("params", json::object());
  int d = p.value("dim", 3);
  if (v == "hyperplane") return std::make_shared<HyperplaneBoundary>(d, p.value("window_half", 4.0));
  if (v == "hyperplane-patch")
    return std::make_shared<HyperplaneBoundary>(d, point_from_json(p.at("patch_lo")), point_from_json(p.at("patch_hi")));
  if (v == "sphere") {
    Point c = p.contains("center") ? point_from_json(p.at("center")) : Point(Point::Zero(d));
    return std::make_shared<SphereBoundary>(d, c, p.value("radius", 1.0));
  }
  if (v == "lipschitz-graph") {
    auto prof = p.value("profile", std::string("tent")) == "sine" ? GraphBoundary::Profile::Sine
                                                                  : GraphBoundary::Profile::Tent;
    return std::make_shared<GraphBoundary>(d, prof, p.value("amplitude", 0.5), p.value("frequency", 1.0),
                                           p.value("window_half", 1.0));
  }
  if (v == "polyhedral") {
    std::vector<Box> faces;
    for (const auto& f : p.at("faces")) faces.push_back({point_from_json(f.at(0)), point_from_json(f.at(1))});
    return std::make_shared<PolyhedralBoundary>(d, std::move(faces));
  }
  if (v == "four-corner-cantor") return std::make_shared<CantorBoundary>(p.value("depth", 3));
  if (v == "point-cloud") {
    WeightedCloud c;
    c.spacing = p.value("spacing", 0.0);
    for (const auto& s : j.at("samples")) {
      c.points.push_back(point_from_json(s.at(0)));
      c.weights.push_back(s.at(1).get<double>());
    }
    BoundaryPtr parent = p.contains("parent") ? boundary_from_json(p.at("parent")) : nullptr;
    return std::make_shared<PointCloudBoundary>(std::move(c), parent);
  }
  throw ConfigError("boundary document: unknown variant '" + v + "'");
}

std::vector<std::string> builtin_boundary_names() {
  return {"plane", "plane2d", "plane-patch", "sphere", "circle", "lipschitz-tent", "lipschitz-sine", "cantor-<m>",
          "halfspace-slit"};
}

BoundaryPtr builtin_boundary(const std::string& name) {
  if (name == "plane") return std::make_shared<HyperplaneBoundary>(3);
  if (name == "plane2d") return std::make_shared<HyperplaneBoundary>(2);
  if (name == "plane-patch") return std::make_shared<HyperplaneBoundary>(3, make_point({0, 0}), make_point({1, 1}));
  if (name == "sphere") return std::make_shared<SphereBoundary>(3, Point::Zero(3), 1.0);
  if (name == "circle") return std::make_shared<SphereBoundary>(2, Point::Zero(2), 1.0);
  if (name == "lipschitz-tent")
    return std::make_shared<GraphBoundary>(3, GraphBoundary::Profile::Tent, 0.5, 1.0, 1.0);
  if (name == "lipschitz-sine")
    return std::make_shared<GraphBoundary>(3, GraphBoundary::Profile::Sine, 0.2, kPi, 1.0);
  if (name == "halfspace-slit") return make_slit_halfspace(3, 4.0, 1.0);
  if (name.rfind("cantor-", 0) == 0) return std::make_shared<CantorBoundary>(std::stoi(name.substr(7)));
  return nullptr;
}

BoundaryPtr load_boundary(const std::string& name_or_path) {
  if (auto b = builtin_boundary(name_or_path)) return b;
  std::ifstream in(name_or_path);
  if (!in) throw IoError("cannot open boundary file '" + name_or_path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("boundary file is not valid JSON: ") + e.what());
  }
  return boundary_from_json(j);
}

}  // namespace rectilab
