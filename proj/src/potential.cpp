#include "rectilab/potential.hpp"

#include "rectilab/parallel.hpp"
#include "rectilab/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace rectilab {

// ---------------------------------------------------------------------------
// Fundamental solution and kernels

double FundamentalSolution::cn() const {
  if (d == 2) return 1.0 / (2.0 * kPi);
  return 1.0 / ((d - 2) * unit_sphere_area(d));
}

double FundamentalSolution::value(const Point& X) const {
  const double r = X.norm();
  if (d == 2) return -std::log(r) / (2.0 * kPi);
  return cn() * std::pow(r, 2.0 - d);
}

Point FundamentalSolution::gradient(const Point& X) const {
  const double r = X.norm();
  return -X / (unit_sphere_area(d) * std::pow(r, d));
}

Hessian FundamentalSolution::hessian(const Point& X) const {
  const double r2 = X.squaredNorm();
  const double rd = std::pow(r2, 0.5 * d);
  Hessian H = -Hessian::Identity(d, d) / rd + d * (X * X.transpose()) / (rd * r2);
  return H / unit_sphere_area(d);
}

double CZKernel::phi(double rho) const {
  if (rho <= 1.0) return 0.0;
  if (rho >= 2.0) return 1.0;
  const double t = rho - 1.0;
  if (cutoff == Cutoff::Smoothstep) return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
  auto psi = [](double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; };
  const double a = psi(t), b = psi(1.0 - t);
  return a / (a + b);
}

Point CZKernel::eval(const Point& x) const { return x / std::pow(x.norm(), d); }

Point CZKernel::eval(const Point& x, double eps) const {
  const double r = x.norm();
  const double p = phi(r / eps);
  if (p == 0.0) return Point::Zero(d);
  return p * x / std::pow(r, d);
}

Hessian CZKernel::jacobian(const Point& x) const {
  const double r2 = x.squaredNorm();
  const double rd = std::pow(r2, 0.5 * d);
  return Hessian::Identity(d, d) / rd - d * (x * x.transpose()) / (rd * r2);
}

KernelBounds kernel_bounds(const CZKernel& K, const std::vector<double>& radii, int directions, std::uint64_t seed) {
  KernelBounds b;
  Rng rng(derive_seed(seed, 0, 0xc2));
  const int n = K.d - 1;
  for (double r : radii)
    for (int i = 0; i < directions; ++i) {
      Point x = r * rng.on_sphere(K.d);
      Point k = K.eval(x);
      b.c0 = std::max(b.c0, std::pow(r, n) * k.norm());
      b.c1 = std::max(b.c1, std::pow(r, n + 1) * K.jacobian(x).norm());
      // second derivatives by central differences of the closed-form Jacobian
      double s2 = 0;
      const double step = 1e-4 * r;
      for (int j = 0; j < K.d; ++j) {
        Point e = step * unit(K.d, j);
        Hessian dj = (K.jacobian(x + e) - K.jacobian(x - e)) / (2 * step);
        s2 += dj.squaredNorm();
      }
      b.c2 = std::max(b.c2, std::pow(r, n + 2) * std::sqrt(s2));
      if ((K.eval(Point(-x)) + k).norm() > 1e-12 * k.norm()) b.odd = false;
    }
  return b;
}

// ---------------------------------------------------------------------------
// Panels

namespace {

constexpr double kG3[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr double kW3[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
constexpr double kG2[2] = {-0.5773502691896258, 0.5773502691896258};

enum class PanelKind { Point, Flat, Gnomonic, Arc };

struct Panel {
  PanelKind kind = PanelKind::Point;
  Box box;          // bounding box; the face itself for flat panels
  int axis = 0;     // normal axis (flat), cube-face axis (gnomonic)
  int sign = 1;     // cube-face side (gnomonic)
  double u0 = 0, u1 = 0, v0 = 0, v1 = 0;  // parameter box (curved)
  double density = 0;                     // flat panels
  Point p;                                // point panels, centroid otherwise
  double mass = 0;                        // int f d sigma
  double area = 0;
  double l2 = 0;  // int f^2 d sigma
  Hessian mom;    // second moment about p
};

struct Acc {
  double v = 0;
  Point g;
  Hessian H;
  double err = 0;
  Acc() = default;
  explicit Acc(int d) : g(Point::Zero(d)), H(Hessian::Zero(d, d)) {}
};

// Corner antiderivatives of 1/r over a rectangle, with u, v the tangential
// offsets (field minus source) and Z the normal offset.
struct Corner {
  double P, Pu, Pv, Pz, Huu, Hvv, Huv, Huz, Hvz;
};

double log_plus(double v, double r, double rest2) {
  // log(v + r) without cancellation when v < 0
  if (v >= 0) return std::log(v + r);
  return std::log(std::max(rest2, 1e-300)) - std::log(r - v);
}

Corner corner(double u, double v, double Z) {
  Corner c;
  const double u2 = u * u, v2 = v * v, z2 = Z * Z;
  const double r = std::sqrt(u2 + v2 + z2);
  const double Lv = log_plus(v, r, u2 + z2), Lu = log_plus(u, r, v2 + z2);
  const double at = Z == 0.0 ? 0.0 : std::atan(u * v / (Z * r));
  c.P = (u == 0 ? 0.0 : u * Lv) + (v == 0 ? 0.0 : v * Lu) - Z * at;
  c.Pu = Lv;
  c.Pv = Lu;
  c.Pz = -at;
  const double a = u2 + z2, b = v2 + z2;
  c.Huu = a > 0 ? -u * v / (a * r) : 0.0;
  c.Hvv = b > 0 ? -u * v / (b * r) : 0.0;
  c.Huv = 1.0 / r;
  c.Huz = a > 0 ? -Z * v / (a * r) : 0.0;
  c.Hvz = b > 0 ? -Z * u / (b * r) : 0.0;
  return c;
}

int tangential(int d, int axis, int which) {
  int t = 0;
  for (int i = 0; i < d; ++i) {
    if (i == axis) continue;
    if (t++ == which) return i;
  }
  return -1;
}

void add_rect(const Panel& P, const Point& X, int order, Acc& acc) {
  const int a = P.axis, b = tangential(3, a, 0), c = tangential(3, a, 1);
  const double Z = X(a) - P.box.lo(a);
  const double ua[2] = {X(b) - P.box.hi(b), X(b) - P.box.lo(b)};
  const double va[2] = {X(c) - P.box.hi(c), X(c) - P.box.lo(c)};
  Corner s{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double sg = (i == j) ? 1.0 : -1.0;
      Corner k = corner(ua[i], va[j], Z);
      s.P += sg * k.P;
      s.Pu += sg * k.Pu;
      s.Pv += sg * k.Pv;
      s.Pz += sg * k.Pz;
      s.Huu += sg * k.Huu;
      s.Hvv += sg * k.Hvv;
      s.Huv += sg * k.Huv;
      s.Huz += sg * k.Huz;
      s.Hvz += sg * k.Hvz;
    }
  const double f = P.density / (4.0 * kPi);
  acc.v += f * s.P;
  if (order >= 1) {
    acc.g(b) += f * s.Pu;
    acc.g(c) += f * s.Pv;
    acc.g(a) += f * s.Pz;
  }
  if (order >= 2) {
    acc.H(b, b) += f * s.Huu;
    acc.H(c, c) += f * s.Hvv;
    acc.H(a, a) -= f * (s.Huu + s.Hvv);
    acc.H(b, c) += f * s.Huv;
    acc.H(c, b) += f * s.Huv;
    acc.H(b, a) += f * s.Huz;
    acc.H(a, b) += f * s.Huz;
    acc.H(c, a) += f * s.Hvz;
    acc.H(a, c) += f * s.Hvz;
  }
}

void add_segment(const Panel& P, const Point& X, int order, Acc& acc) {
  const int a = P.axis, b = 1 - a;
  const double Z = X(a) - P.box.lo(a);
  const double us[2] = {X(b) - P.box.hi(b), X(b) - P.box.lo(b)};
  double I0 = 0, Iu = 0, Iz = 0, Huu = 0, Huz = 0;
  for (int i = 0; i < 2; ++i) {
    const double sg = i == 1 ? 1.0 : -1.0, u = us[i];
    const double rho2 = u * u + Z * Z;
    const double lr = 0.5 * std::log(std::max(rho2, 1e-300));
    I0 += sg * ((u == 0 ? 0.0 : u * lr) - u + (Z == 0 ? 0.0 : Z * std::atan(u / Z)));
    Iu += sg * lr;
    Iz += sg * (Z == 0 ? 0.0 : std::atan(u / Z));
    Huu += sg * (rho2 > 0 ? u / rho2 : 0.0);
    Huz += sg * (rho2 > 0 ? Z / rho2 : 0.0);
  }
  const double f = -P.density / (2.0 * kPi);
  acc.v += f * I0;
  if (order >= 1) {
    acc.g(b) += f * Iu;
    acc.g(a) += f * Iz;
  }
  if (order >= 2) {
    acc.H(b, b) += f * Huu;
    acc.H(a, a) -= f * Huu;
    acc.H(a, b) += f * Huz;
    acc.H(b, a) += f * Huz;
  }
}

void add_point(const FundamentalSolution& G, const Point& Y, double w, const Point& X, int order, Acc& acc) {
  const int d = G.d;
  const Point R = X - Y;
  const double r2 = R.squaredNorm();
  // |S^{d-1}| for d = 2, 3, 4
  const double area = d == 2 ? 2 * kPi : d == 3 ? 4 * kPi : 2 * kPi * kPi;
  const double ir2 = 1.0 / r2;
  const double ird = d == 2 ? ir2 : d == 3 ? ir2 * std::sqrt(ir2) : ir2 * ir2;
  if (d == 2)
    acc.v -= w * 0.5 * std::log(r2) / area;
  else
    acc.v += w * r2 * ird / ((d - 2) * area);
  if (order >= 1) acc.g -= (w * ird / area) * R;
  if (order >= 2) {
    const double c = w * ird / area;
    for (int i = 0; i < d; ++i) {
      acc.H(i, i) -= c;
      for (int j = 0; j < d; ++j) acc.H(i, j) += c * d * ir2 * R(i) * R(j);
    }
  }
}

// Rough internal second moment of a curved panel from its bounding box.
Hessian box_moment(const Box& b, double mass) {
  const Point e = b.extent();
  Hessian M = Hessian::Zero(e.size(), e.size());
  for (int i = 0; i < e.size(); ++i) M(i, i) = mass * e(i) * e(i) / 12.0;
  return M;
}

double gnomonic_solid_angle(double u, double v) { return std::atan(u * v / std::sqrt(1 + u * u + v * v)); }

}  // namespace

struct SingleLayer::Impl {
  int d = 3;
  FundamentalSolution G;
  Density f;
  LayerOptions opt;
  std::vector<Panel> panels;
  double margin = 0;
  // curved geometry
  Point C;
  double R = 1;

  struct Node {
    Box box;
    Point centroid;
    Point dipole;
    Hessian quad;  // traceless second moment
    double mass = 0, abs_mass = 0;
    int left = -1, right = -1;
    std::size_t first = 0, count = 0;
  };
  std::vector<Node> nodes;
  std::vector<std::size_t> order;

  Point gnomonic(const Panel& P, double u, double v) const {
    Point q(3);
    q(P.axis) = P.sign;
    q(tangential(3, P.axis, 0)) = u;
    q(tangential(3, P.axis, 1)) = v;
    return C + R * q.normalized();
  }
  Point arc(double t) const { return C + R * make_point({std::cos(t), std::sin(t)}); }

  // Gauss rule on a curved cell, 3 points (2 for the embedded estimate).
  void curved_rule(const Panel& P, double u0, double u1, double v0, double v1, const Point& X, int ord, Acc& acc,
                   bool embedded) const {
    const double hu = 0.5 * (u1 - u0), cu = 0.5 * (u1 + u0);
    Acc a3(d), a2(d);
    if (P.kind == PanelKind::Arc) {
      for (int i = 0; i < 3; ++i) {
        double t = cu + hu * kG3[i];
        Point y = arc(t);
        add_point(G, y, kW3[i] * hu * R * f(y), X, ord, a3);
      }
      if (embedded)
        for (int i = 0; i < 2; ++i) {
          double t = cu + hu * kG2[i];
          Point y = arc(t);
          add_point(G, y, hu * R * f(y), X, ord, a2);
        }
    } else {
      const double hv = 0.5 * (v1 - v0), cv = 0.5 * (v1 + v0);
      auto jac = [&](double u, double v) { return R * R / std::pow(1 + u * u + v * v, 1.5); };
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double u = cu + hu * kG3[i], v = cv + hv * kG3[j];
          Point y = gnomonic(P, u, v);
          add_point(G, y, kW3[i] * kW3[j] * hu * hv * jac(u, v) * f(y), X, ord, a3);
        }
      if (embedded)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            double u = cu + hu * kG2[i], v = cv + hv * kG2[j];
            Point y = gnomonic(P, u, v);
            add_point(G, y, hu * hv * jac(u, v) * f(y), X, ord, a2);
          }
    }
    acc.v += a3.v;
    acc.g += a3.g;
    acc.H += a3.H;
    if (embedded) {
      double e = ord == 0 ? std::abs(a3.v - a2.v) : ord == 1 ? (a3.g - a2.g).norm() : (a3.H - a2.H).norm();
      acc.err += e;
    }
  }

  void curved(const Panel& P, double u0, double u1, double v0, double v1, const Point& X, int ord, Acc& acc,
              int depth) const {
    Point pc, pa, pb;
    if (P.kind == PanelKind::Arc) {
      pc = arc(0.5 * (u0 + u1));
      pa = arc(u0);
      pb = arc(u1);
    } else {
      pc = gnomonic(P, 0.5 * (u0 + u1), 0.5 * (v0 + v1));
      pa = gnomonic(P, u0, v0);
      pb = gnomonic(P, u1, v1);
    }
    const double size = std::max((pa - pb).norm(), 1e-300);
    const double dist = (X - pc).norm();
    if (dist > opt.adapt * size || depth >= opt.max_depth) {
      curved_rule(P, u0, u1, v0, v1, X, ord, acc, dist < 2 * opt.adapt * size);
      return;
    }
    const double um = 0.5 * (u0 + u1);
    if (P.kind == PanelKind::Arc) {
      curved(P, u0, um, 0, 0, X, ord, acc, depth + 1);
      curved(P, um, u1, 0, 0, X, ord, acc, depth + 1);
      return;
    }
    const double vm = 0.5 * (v0 + v1);
    curved(P, u0, um, v0, vm, X, ord, acc, depth + 1);
    curved(P, um, u1, v0, vm, X, ord, acc, depth + 1);
    curved(P, u0, um, vm, v1, X, ord, acc, depth + 1);
    curved(P, um, u1, vm, v1, X, ord, acc, depth + 1);
  }

  void exact(const Panel& P, const Point& X, int ord, Acc& acc) const {
    switch (P.kind) {
      case PanelKind::Point:
        add_point(G, P.p, P.mass, X, ord, acc);
        break;
      case PanelKind::Flat:
        if (d == 3)
          add_rect(P, X, ord, acc);
        else
          add_segment(P, X, ord, acc);
        break;
      case PanelKind::Gnomonic:
      case PanelKind::Arc:
        curved(P, P.u0, P.u1, P.v0, P.v1, X, ord, acc, 0);
        break;
    }
  }

  int build(std::size_t first, std::size_t count) {
    Node n;
    n.first = first;
    n.count = count;
    n.box = Box::empty(d);
    Point cw = Point::Zero(d);
    double wsum = 0;
    for (std::size_t i = first; i < first + count; ++i) {
      const Panel& P = panels[order[i]];
      n.box.expand(P.box);
      n.mass += P.mass;
      n.abs_mass += std::abs(P.mass);
      double w = std::abs(P.mass) > 0 ? std::abs(P.mass) : P.area;
      cw += w * P.p;
      wsum += w;
    }
    n.centroid = wsum > 0 ? Point(cw / wsum) : n.box.center();
    n.dipole = Point::Zero(d);
    n.quad = Hessian::Zero(d, d);
    for (std::size_t i = first; i < first + count; ++i) {
      const Panel& P = panels[order[i]];
      const Point s = P.p - n.centroid;
      n.dipole += P.mass * s;
      n.quad += P.mass * s * s.transpose();
      if (P.mom.size()) n.quad += P.mom;
    }
    n.quad -= (n.quad.trace() / d) * Hessian::Identity(d, d);
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(n);
    if (count > 2) {
      Point ext = n.box.extent();
      int axis = 0;
      ext.maxCoeff(&axis);
      auto mid = order.begin() + static_cast<std::ptrdiff_t>(first + count / 2);
      std::nth_element(order.begin() + static_cast<std::ptrdiff_t>(first), mid,
                       order.begin() + static_cast<std::ptrdiff_t>(first + count),
                       [&](std::size_t x, std::size_t y) { return panels[x].p(axis) < panels[y].p(axis); });
      int l = build(first, count / 2);
      int r = build(first + count / 2, count - count / 2);
      nodes[id].left = l;
      nodes[id].right = r;
    }
    return id;
  }

  // Dipole and quadrupole corrections about the centroid.
  void multipole(const Node& n, const Point& X, int ord, Acc& acc) const {
    const Point R = X - n.centroid;
    const double r2 = R.squaredNorm(), ir2 = 1.0 / r2;
    const double area = d == 2 ? 2 * kPi : d == 3 ? 4 * kPi : 2 * kPi * kPi;
    const double ird = d == 2 ? ir2 : d == 3 ? ir2 * std::sqrt(ir2) : ir2 * ir2;
    const Point& D = n.dipole;
    const double RD = R.dot(D);
    // -D . grad E and its derivatives
    acc.v += ird * RD / area;
    if (ord >= 1) acc.g += (ird / area) * (D - d * RD * ir2 * R);
    if (ord >= 2) {
      Hessian T = d * ir2 * (D * R.transpose() + R * D.transpose() + RD * Hessian::Identity(d, d)) -
                  d * (d + 2) * ir2 * ir2 * RD * (R * R.transpose());
      acc.H -= (ird / area) * T;
    }
    // (d / 2|S|) q(R) r^{-(d+2)} with q = R^T Q R
    const double A = d / (2.0 * area);
    const Point QR = n.quad * R;
    const double q = R.dot(QR);
    const double p = d + 2;
    const double irp = ird * ir2;
    acc.v += A * q * irp;
    if (ord >= 1) acc.g += A * irp * (2.0 * QR - p * q * ir2 * R);
    if (ord >= 2)
      acc.H += A * irp *
               (2.0 * n.quad - 2.0 * p * ir2 * (QR * R.transpose() + R * QR.transpose()) +
                q * ir2 * (-p * Hessian::Identity(d, d) + p * (p + 2) * ir2 * (R * R.transpose())));
  }

  void evaluate(const Point& X, int ord, Acc& acc) const {
    if (nodes.empty()) return;
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const Node& n = nodes[stack.back()];
      stack.pop_back();
      const double diam = n.box.diameter(), dist = n.box.distance(X);
      if (n.count > 1 && diam < opt.theta * dist) {
        Acc m(d);
        add_point(G, n.centroid, n.mass, X, ord, m);
        multipole(n, X, ord, m);
        acc.v += m.v;
        acc.g += m.g;
        acc.H += m.H;
        const double q = diam / dist;
        const double mag = ord == 0 ? std::abs(m.v) : ord == 1 ? m.g.norm() : m.H.norm();
        acc.err += q * q * q * mag * (n.abs_mass / std::max(std::abs(n.mass), 1e-300));
        continue;
      }
      if (n.left < 0) {
        for (std::size_t i = n.first; i < n.first + n.count; ++i) exact(panels[order[i]], X, ord, acc);
        continue;
      }
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }

  // --- construction helpers
  void flat_face(const Box& face, int axis) {
    const int n = d - 1;
    std::array<int, 3> cnt{1, 1, 1};
    std::array<int, 3> tang{};
    for (int t = 0; t < n; ++t) {
      tang[t] = tangential(d, axis, t);
      double ext = face.hi(tang[t]) - face.lo(tang[t]);
      if (!f.constant) cnt[t] = std::max(1, static_cast<int>(std::ceil(ext / opt.h - 1e-9)));
    }
    for (int i = 0; i < cnt[0]; ++i)
      for (int j = 0; j < (n > 1 ? cnt[1] : 1); ++j) {
        Box b = face;
        const int t0 = tang[0];
        const double s0 = (face.hi(t0) - face.lo(t0)) / cnt[0];
        b.lo(t0) = face.lo(t0) + i * s0;
        b.hi(t0) = i + 1 == cnt[0] ? face.hi(t0) : face.lo(t0) + (i + 1) * s0;
        if (n > 1) {
          const int t1 = tang[1];
          const double s1 = (face.hi(t1) - face.lo(t1)) / cnt[1];
          b.lo(t1) = face.lo(t1) + j * s1;
          b.hi(t1) = j + 1 == cnt[1] ? face.hi(t1) : face.lo(t1) + (j + 1) * s1;
        }
        Panel P;
        P.kind = PanelKind::Flat;
        P.box = b;
        P.axis = axis;
        P.p = b.center();
        P.density = f(P.p);
        if (P.density == 0.0) continue;
        P.area = 1;
        for (int t = 0; t < n; ++t) P.area *= b.hi(tang[t]) - b.lo(tang[t]);
        P.mass = P.density * P.area;
        P.l2 = P.density * P.density * P.area;
        P.mom = Hessian::Zero(d, d);
        for (int t = 0; t < n; ++t) {
          const double e = b.hi(tang[t]) - b.lo(tang[t]);
          P.mom(tang[t], tang[t]) = P.mass * e * e / 12.0;
        }
        panels.push_back(P);
      }
  }

  void sphere3(int N) {
    const double step = 2.0 / N;
    for (int a = 0; a < 3; ++a)
      for (int s : {-1, 1})
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < N; ++j) {
            Panel P;
            P.kind = PanelKind::Gnomonic;
            P.axis = a;
            P.sign = s;
            P.u0 = -1 + i * step;
            P.u1 = i + 1 == N ? 1.0 : -1 + (i + 1) * step;
            P.v0 = -1 + j * step;
            P.v1 = j + 1 == N ? 1.0 : -1 + (j + 1) * step;
            P.area = R * R *
                     (gnomonic_solid_angle(P.u1, P.v1) - gnomonic_solid_angle(P.u0, P.v1) -
                      gnomonic_solid_angle(P.u1, P.v0) + gnomonic_solid_angle(P.u0, P.v0));
            P.box = Box::empty(3);
            for (double u : {P.u0, P.u1})
              for (double v : {P.v0, P.v1}) P.box.expand(gnomonic(P, u, v));
            P.box.expand(gnomonic(P, 0.5 * (P.u0 + P.u1), 0.5 * (P.v0 + P.v1)));
            P.p = gnomonic(P, 0.5 * (P.u0 + P.u1), 0.5 * (P.v0 + P.v1));
            const double fv = f(P.p);
            P.mass = fv * P.area;
            P.l2 = fv * fv * P.area;
            P.mom = box_moment(P.box, P.mass);
            panels.push_back(P);
          }
    margin = 1e-12 * R;
  }

  void circle(int N) {
    const double step = 2 * kPi / N;
    for (int i = 0; i < N; ++i) {
      Panel P;
      P.kind = PanelKind::Arc;
      P.u0 = i * step;
      P.u1 = (i + 1) * step;
      P.area = R * step;
      P.box = Box::empty(2);
      P.box.expand(arc(P.u0));
      P.box.expand(arc(P.u1));
      P.box.expand(arc(0.5 * (P.u0 + P.u1)));
      P.p = arc(0.5 * (P.u0 + P.u1));
      const double fv = f(P.p);
      P.mass = fv * P.area;
      P.l2 = fv * fv * P.area;
      P.mom = box_moment(P.box, P.mass);
      panels.push_back(P);
    }
    margin = 1e-12 * R;
  }

  void cloud(const WeightedCloud& c) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      Panel P;
      P.kind = PanelKind::Point;
      P.p = c.points[i];
      P.box = Box{P.p, P.p};
      const double fv = f(P.p);
      P.area = c.weights[i];
      P.mass = fv * c.weights[i];
      P.l2 = fv * fv * c.weights[i];
      if (P.mass != 0.0) panels.push_back(P);
    }
    margin = 2.0 * c.spacing;
  }
};

SingleLayer::SingleLayer(const BoundaryModel& E, Density f, const LayerOptions& opt)
    : E_(&E), impl_(std::make_unique<Impl>()) {
  Impl& m = *impl_;
  m.d = E.ambient_dim();
  m.G.d = m.d;
  m.f = std::move(f);
  m.opt = opt;
  if (!m.f.constant && !m.f.f) throw ArgumentError("density has no function");
  if (!(opt.h > 0) || !(opt.theta >= 0)) throw ArgumentError("bad layer options");
  const int d = m.d;
  if (auto* hp = dynamic_cast<const HyperplaneBoundary*>(&E); hp && d <= 3) {
    Box base = hp->base_box();
    if (!hp->has_patch()) {
      const double W = opt.window > 0 ? opt.window : 32.0;
      Point c = opt.center.size() == d ? opt.center : zeros(d);
      base = Box::around(c.head(d - 1), W);
    }
    Box face{zeros(d), zeros(d)};
    face.lo.head(d - 1) = base.lo;
    face.hi.head(d - 1) = base.hi;
    m.flat_face(face, d - 1);
  } else if (auto* pb = dynamic_cast<const PolyhedralBoundary*>(&E)) {
    for (std::size_t i = 0; i < pb->faces().size(); ++i) m.flat_face(pb->faces()[i], pb->normal_axis(i));
  } else if (auto* cb = dynamic_cast<const CantorBoundary*>(&E)) {
    for (const Point& p : cb->left_ends()) {
      Box seg{p, p};
      seg.hi(0) += cb->segment_length();
      m.flat_face(seg, 1);
    }
  } else if (auto* sb = dynamic_cast<const SphereBoundary*>(&E); sb && (d == 2 || d == 3)) {
    m.C = sb->center();
    m.R = sb->radius();
    if (d == 3)
      m.sphere3(std::max(1, opt.sphere_panels));
    else
      m.circle(4 * std::max(1, opt.sphere_panels));
  } else if (auto* pc = dynamic_cast<const PointCloudBoundary*>(&E)) {
    m.cloud(pc->cloud());
  } else {
    m.cloud(E.sample(opt.h, opt.seed));
  }
  m.order.resize(m.panels.size());
  std::iota(m.order.begin(), m.order.end(), std::size_t{0});
  if (!m.panels.empty()) m.build(0, m.panels.size());
}

SingleLayer::SingleLayer(const BoundaryModel& E, const std::vector<PanelSpec>& specs, const LayerOptions& opt)
    : E_(&E), impl_(std::make_unique<Impl>()) {
  Impl& m = *impl_;
  m.d = E.ambient_dim();
  m.G.d = m.d;
  m.f = Density::one();
  m.opt = opt;
  const int d = m.d;
  for (const auto& s : specs) {
    if (s.mass == 0.0) continue;
    if (s.face.lo.size() != d) throw ArgumentError("panel dimension mismatch");
    Panel P;
    P.box = s.face;
    P.p = s.face.center();
    P.mass = s.mass;
    P.mom = Hessian::Zero(d, d);
    if (s.face.lo == s.face.hi) {
      P.kind = PanelKind::Point;
      P.area = 1;
    } else {
      if (s.axis < 0 || s.axis >= d || s.face.hi(s.axis) != s.face.lo(s.axis))
        throw ArgumentError("flat panel must be degenerate along its axis");
      P.kind = PanelKind::Flat;
      P.axis = s.axis;
      P.area = 1;
      for (int t = 0; t < d; ++t)
        if (t != s.axis) {
          const double e = s.face.hi(t) - s.face.lo(t);
          P.area *= e;
          P.mom(t, t) = s.mass * e * e / 12.0;
        }
      P.density = s.mass / P.area;
    }
    P.l2 = P.mass * P.mass / P.area;
    m.panels.push_back(P);
  }
  m.order.resize(m.panels.size());
  std::iota(m.order.begin(), m.order.end(), std::size_t{0});
  if (!m.panels.empty()) m.build(0, m.panels.size());
}

SingleLayer::~SingleLayer() = default;
SingleLayer::SingleLayer(SingleLayer&&) noexcept = default;
SingleLayer& SingleLayer::operator=(SingleLayer&&) noexcept = default;

std::size_t SingleLayer::panels() const { return impl_->panels.size(); }
double SingleLayer::margin() const { return impl_->margin; }
double SingleLayer::mass() const {
  std::vector<double> m;
  for (const auto& p : impl_->panels) m.push_back(p.mass);
  return pairwise_sum(m);
}

double SingleLayer::norm2() const {
  std::vector<double> m;
  for (const auto& p : impl_->panels) m.push_back(p.l2);
  return pairwise_sum(m);
}

LayerValue SingleLayer::evaluate(const Point& X, int order) const {
  if (order < 0 || order > 2) throw ArgumentError("order must be 0, 1 or 2");
  const double delta = E_->project(X).distance;
  if (!(delta > impl_->margin))
    throw ProximityError("evaluation point within the quadrature margin of E", impl_->margin);
  Acc acc(impl_->d);
  impl_->evaluate(X, order, acc);
  LayerValue v;
  v.order = order;
  v.value = acc.v;
  v.gradient = acc.g;
  v.hessian = acc.H;
  v.err_est = acc.err;
  return v;
}

LayerValue single_layer(const BoundaryModel& E, const Density& f, const Point& X, int order, const LayerOptions& opt) {
  return SingleLayer(E, f, opt).evaluate(X, order);
}

// ---------------------------------------------------------------------------
// Volume quadrature

CarlesonOptions CarlesonOptions::refined() const {
  CarlesonOptions o = *this;
  if (o.k_collar != 0) ++o.k_collar;
  o.refine_steps = refine_steps + 1;
  o.layer.window = layer.window > 0 ? 2 * layer.window : 0;
  o.layer.h = 0.5 * layer.h;
  o.layer.sphere_panels = 2 * layer.sphere_panels;
  return o;
}

namespace {

struct Cell {
  Point X;
  double vol;
  int k;
};

// Cell centres of the quadrature cubes inside `inside`.
std::vector<Cell> quadrature_cells(const BoundaryModel& E, const Box& region, int k_collar, double ratio, int sub,
                                   const std::function<bool(const Point&)>& inside) {
  BoundaryPtr Ep(&E, [](const BoundaryModel*) {});
  WhitneyOptions wo;
  wo.ratio = ratio;
  wo.k_finest = k_collar;
  WhitneyDecomposition W(Ep, region, Side::Both, wo);
  std::vector<Cell> cells;
  const int d = E.ambient_dim();
  const int per = 1 << sub;
  W.visit(region, k_collar, [&](const WhitneyCube& I) {
    const Box b = I.box();
    const double s = I.side() / per;
    const double vol = std::pow(s, d);
    std::array<int, kMaxDim> idx{};
    while (true) {
      Point X(d);
      for (int i = 0; i < d; ++i) X(i) = b.lo(i) + (idx[i] + 0.5) * s;
      if (inside(X)) cells.push_back({X, vol, I.k});
      int i = 0;
      while (i < d && ++idx[i] == per) idx[i++] = 0;
      if (i == d) break;
    }
  });
  return cells;
}

}  // namespace

nlohmann::json CarlesonReport::to_json() const {
  nlohmann::json gens = nlohmann::json::array();
  for (auto [k, v] : by_generation) gens.push_back({k, v});
  return {{"center", std::vector<double>(x0.data(), x0.data() + x0.size())},
          {"r", r},
          {"value", value},
          {"ratio", ratio},
          {"richardson", richardson},
          {"err_est", err_est},
          {"k_collar", k_collar},
          {"sub", sub},
          {"window", window},
          {"cells", cells},
          {"by_generation", gens}};
}

CarlesonReport carleson_ur_functional(const BoundaryModel& E, const Ball& B, const CarlesonOptions& opt) {
  if (!(B.radius > 0)) throw ArgumentError("ball radius must be positive");
  if (E.project(B.center).distance > E.boundary_tolerance(B.radius))
    throw DomainError("Carleson ball must be centred on E");
  const int d = E.ambient_dim(), n = d - 1;
  CarlesonReport rep;
  rep.x0 = B.center;
  rep.r = B.radius;
  rep.k_collar = opt.k_collar != 0 ? opt.k_collar
                                   : static_cast<int>(std::ceil(std::log2(48.0 / B.radius))) + opt.refine_steps;
  rep.sub = opt.sub;
  LayerOptions lo = opt.layer;
  if (!(lo.window > 0)) lo.window = 32.0 * B.radius * std::ldexp(1.0, opt.refine_steps);
  lo.center = B.center;
  rep.window = lo.window;
  SingleLayer S(E, opt.density, lo);

  auto cells = quadrature_cells(E, Box::around(B.center, B.radius), rep.k_collar, opt.ratio, opt.sub,
                                [&](const Point& X) { return (X - B.center).norm() < B.radius; });
  rep.cells = cells.size();
  std::vector<double> vals(cells.size(), 0.0), errs(cells.size(), 0.0);
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        const Cell& c = cells[i];
        const double delta = E.project(c.X).distance;
        if (!(delta > S.margin())) return;
        auto h = S.evaluate(c.X, 2);
        vals[i] = h.hessian.squaredNorm() * delta * c.vol;
        errs[i] = 2.0 * h.hessian.norm() * h.err_est * delta * c.vol;
      },
      opt.workers);
  const double rn = std::pow(B.radius, n);
  std::map<int, std::vector<double>> per_gen;
  for (std::size_t i = 0; i < cells.size(); ++i) per_gen[cells[i].k].push_back(vals[i]);
  for (auto& [k, v] : per_gen) rep.by_generation.push_back({k, pairwise_sum(v) / rn});
  rep.value = pairwise_sum(vals);
  rep.ratio = rep.value / rn;
  const double last = rep.by_generation.empty() ? 0.0 : rep.by_generation.back().second;
  rep.richardson = rep.ratio + last / 3.0;
  rep.err_est = std::abs(last) / 3.0 + pairwise_sum(errs) / rn;
  return rep;
}

nlohmann::json L2Report::to_json() const {
  return {{"lhs", lhs}, {"rhs", rhs}, {"ratio", ratio}, {"conical", conical}, {"cone_ratio", cone_ratio},
          {"cells", cells}};
}

L2Report global_l2_check(const BoundaryModel& E, const Density& f, const Box& region, const CarlesonOptions& opt) {
  const int d = E.ambient_dim(), n = d - 1;
  L2Report rep;
  const double ext = region.extent().maxCoeff();
  const int k = opt.k_collar != 0 ? opt.k_collar : static_cast<int>(std::ceil(std::log2(48.0 / ext))) + opt.refine_steps;
  LayerOptions lo = opt.layer;
  if (!(lo.window > 0)) lo.window = 4.0 * ext * std::ldexp(1.0, opt.refine_steps);
  lo.center = region.center();
  SingleLayer S(E, f, lo);
  rep.rhs = S.norm2();
  auto cells = quadrature_cells(E, region, k, opt.ratio, opt.sub, [](const Point&) { return true; });
  rep.cells = cells.size();
  std::vector<double> v(cells.size(), 0.0), c(cells.size(), 0.0);
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        const double delta = E.project(cells[i].X).distance;
        if (!(delta > S.margin())) return;
        const double h2 = S.evaluate(cells[i].X, 2).hessian.squaredNorm();
        v[i] = h2 * delta * cells[i].vol;
        c[i] = h2 * std::pow(delta, 1.0 - n) * E.measure_in_ball(cells[i].X, 2.0 * delta) * cells[i].vol;
      },
      opt.workers);
  rep.lhs = pairwise_sum(v);
  rep.conical = pairwise_sum(c);
  rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
  rep.cone_ratio = rep.lhs > 0 ? rep.conical / rep.lhs : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Truncated singular integrals

SioField truncated_sio(const WeightedCloud& cloud, const CZKernel& K, const Density& f, double eps, int workers) {
  if (!(eps > 2.0 * cloud.spacing)) throw ArgumentError("eps must exceed twice the sample spacing");
  SioField out;
  out.cloud = cloud;
  out.eps = eps;
  const std::size_t N = cloud.size();
  const int d = N ? static_cast<int>(cloud.points[0].size()) : K.d;
  std::vector<double> fw(N);
  for (std::size_t j = 0; j < N; ++j) fw[j] = f(cloud.points[j]) * cloud.weights[j];
  out.values.assign(N, Point::Zero(d));
  parallel_for(
      N,
      [&](std::size_t i) {
        Point s = Point::Zero(d);
        const Point& x = cloud.points[i];
        for (std::size_t j = 0; j < N; ++j) {
          if (j == i || fw[j] == 0.0) continue;
          Point z = x - cloud.points[j];
          if (z.norm() <= eps) continue;
          s += fw[j] * K.eval(z, eps);
        }
        out.values[i] = s;
      },
      workers);
  std::vector<double> t(N), g(N);
  for (std::size_t i = 0; i < N; ++i) {
    t[i] = out.values[i].squaredNorm() * cloud.weights[i];
    g[i] = fw[i] * fw[i] / cloud.weights[i];
  }
  out.norm2 = pairwise_sum(t);
  out.f_norm2 = pairwise_sum(g);
  return out;
}

SioField truncated_sio(const BoundaryModel& E, const CZKernel& K, const Density& f, double eps, const SioOptions& opt) {
  if (K.d != E.ambient_dim()) throw ArgumentError("kernel dimension does not match E");
  return truncated_sio(E.sample(opt.h, opt.seed), K, f, eps, opt.workers);
}

nlohmann::json SioReport::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (auto [e, r] : rows) rs.push_back({{"eps", e}, {"ratio", r}});
  return {{"rows", rs}, {"sup", sup}, {"samples", samples}};
}

SioReport sio_sup_check(const BoundaryModel& E, const CZKernel& K, const Density& f, const std::vector<double>& eps,
                        const SioOptions& opt) {
  if (K.d != E.ambient_dim()) throw ArgumentError("kernel dimension does not match E");
  SioReport rep;
  WeightedCloud cloud = E.sample(opt.h, opt.seed);
  rep.samples = cloud.size();
  for (double e : eps) {
    auto F = truncated_sio(cloud, K, f, e, opt.workers);
    const double r = F.f_norm2 > 0 ? F.norm2 / F.f_norm2 : 0.0;
    rep.rows.push_back({e, r});
    rep.sup = std::max(rep.sup, r);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Non-tangential regions

std::vector<WhitneyCube> nontangential_cubes(const WhitneyDecomposition& W, const Point& x, double tau, int k_stop) {
  if (!(tau > 0)) throw ArgumentError("aperture must be positive");
  std::vector<WhitneyCube> out;
  k_stop = std::min(k_stop, W.k_finest());
  for (int k = W.k_top(); k <= k_stop; ++k) {
    const double s = std::ldexp(1.0, -k);
    W.visit(Box::around(x, tau * s), k, [&](const WhitneyCube& I) {
      if (I.k == k && I.box().distance(x) < tau * s) out.push_back(I);
    });
  }
  return out;
}

std::vector<Box> nontangential_region(const WhitneyDecomposition& W, const Point& x, double tau, int k_stop,
                                      double lambda) {
  std::vector<Box> out;
  for (const auto& I : nontangential_cubes(W, x, tau, k_stop)) out.push_back(fatten(I, lambda));
  return out;
}

double nt_max(const std::function<double(const Point&)>& F, const WhitneyDecomposition& W, const Point& x, double tau,
              int k_stop, int sub, double lambda) {
  double best = 0;
  const int per = 1 << sub;
  for (const Box& b : nontangential_region(W, x, tau, k_stop, lambda)) {
    const int d = b.dim();
    const Point s = b.extent() / per;
    std::array<int, kMaxDim> idx{};
    while (true) {
      Point X(d);
      for (int i = 0; i < d; ++i) X(i) = b.lo(i) + (idx[i] + 0.5) * s(i);
      best = std::max(best, std::abs(F(X)));
      int i = 0;
      while (i < d && ++idx[i] == per) idx[i++] = 0;
      if (i == d) break;
    }
  }
  return best;
}

}  // namespace rectilab
