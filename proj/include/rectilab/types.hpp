#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rectilab {

// Ambient dimensions are dynamic but capped so that points live on the stack.
inline constexpr int kMaxDim = 4;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using Point = VectorT<double>;
using Hessian = MatrixT<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Errors. Every failure mode named by an operation maps to one of these.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};
class ArgumentError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class ConstructionError : public Error {
 public:
  ConstructionError(const std::string& what, double scale) : Error(what), offending_scale(scale) {}
  double offending_scale;
};
class ConnectivityError : public Error {
 public:
  using Error::Error;
};
class SearchFailure : public Error {
 public:
  using Error::Error;
};
class ProximityError : public Error {
 public:
  ProximityError(const std::string& what, double margin) : Error(what), margin(margin) {}
  double margin;
};
class PreconditionError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------

inline Point make_point(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p(i++) = x;
  return p;
}

inline Point zeros(int d) { return Point::Zero(d); }

inline Point unit(int d, int axis) {
  Point p = Point::Zero(d);
  p(axis) = 1.0;
  return p;
}

// Lexicographic strict ordering, used for deterministic tie-breaking.
inline bool lex_less(const Point& a, const Point& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

inline bool all_finite(const Point& p) { return p.allFinite(); }

/// Volume of the unit ball in R^m.
inline double unit_ball_volume(int m) {
  return std::pow(kPi, m / 2.0) / std::tgamma(m / 2.0 + 1.0);
}

/// Surface area of the unit sphere S^{m-1} in R^m.
inline double unit_sphere_area(int m) {
  return 2.0 * std::pow(kPi, m / 2.0) / std::tgamma(m / 2.0);
}

struct Ball {
  Point center;
  double radius = 0.0;

  bool contains(const Point& x) const { return (x - center).norm() < radius; }
  Ball dilate(double kappa) const { return {center, kappa * radius}; }
};

/// Axis-aligned closed box [lo, hi].
struct Box {
  Point lo;
  Point hi;

  static Box cube(const Point& corner, double side) {
    Point hi = corner.array() + side;
    return {corner, hi};
  }
  static Box around(const Point& c, double half) {
    Point lo = c.array() - half;
    Point hi = c.array() + half;
    return {lo, hi};
  }
  static Box empty(int d) {
    return {Point::Constant(d, kInf), Point::Constant(d, -kInf)};
  }

  int dim() const { return static_cast<int>(lo.size()); }
  Point center() const { return 0.5 * (lo + hi); }
  Point extent() const { return hi - lo; }
  double diameter() const { return (hi - lo).norm(); }
  bool is_empty() const { return (hi.array() < lo.array()).any(); }

  bool contains(const Point& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  bool contains_open(const Point& x) const {
    return (x.array() > lo.array()).all() && (x.array() < hi.array()).all();
  }
  bool contains(const Box& b) const {
    return (b.lo.array() >= lo.array()).all() && (b.hi.array() <= hi.array()).all();
  }
  bool intersects(const Box& b) const {
    return (b.lo.array() <= hi.array()).all() && (b.hi.array() >= lo.array()).all();
  }
  bool interiors_intersect(const Box& b) const {
    return (b.lo.array() < hi.array()).all() && (b.hi.array() > lo.array()).all();
  }

  void expand(const Point& x) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  void expand(const Box& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }

  /// Concentric dilation by factor kappa.
  Box dilate(double kappa) const {
    Point c = center();
    Point h = 0.5 * kappa * extent();
    return {c - h, c + h};
  }
  Box inflate(double margin) const {
    Point l = lo.array() - margin;
    Point h = hi.array() + margin;
    return {l, h};
  }

  Point clamp(const Point& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

  double distance(const Point& x) const { return (x - clamp(x)).norm(); }

  double max_distance(const Point& x) const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) {
      double a = std::max(std::abs(x(i) - lo(i)), std::abs(x(i) - hi(i)));
      s += a * a;
    }
    return std::sqrt(s);
  }

  double distance(const Box& b) const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) {
      double gap = std::max({0.0, b.lo(i) - hi(i), lo(i) - b.hi(i)});
      s += gap * gap;
    }
    return std::sqrt(s);
  }
};

}  // namespace rectilab
