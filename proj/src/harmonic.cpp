#include "rectilab/harmonic.hpp"

#include "rectilab/parallel.hpp"
#include "rectilab/rng.hpp"

#include <algorithm>
#include <cmath>

namespace rectilab {

namespace {

struct Exit {
  Point y;
  bool escaped = false;
  int steps = 0;
};

// Poisson kernel of {x_d > 0} is a multivariate Cauchy law of scale t.
Exit halfspace_exit(const Point& X, Rng& rng, bool flip) {
  const int d = static_cast<int>(X.size());
  const double t = X(d - 1);
  Point z(d);
  for (int i = 0; i < d - 1; ++i) z(i) = rng.normal();
  const double w = std::abs(rng.normal());
  Exit e;
  e.y = X;
  e.y.head(d - 1) += (flip ? -t : t) / std::max(w, 1e-300) * z.head(d - 1);
  e.y(d - 1) = 0.0;
  e.steps = 1;
  return e;
}

Exit ball_exit(const Point& X, const Point& c, double R, Rng& rng, bool flip) {
  const int d = static_cast<int>(X.size());
  const Point x = X - c;
  const double a = x.norm();
  Exit e;
  e.steps = 1;
  if (d == 2) {
    // the chord map through x sends uniform measure to the Poisson measure
    const double phi = 2 * kPi * rng.uniform();
    Point y = R * make_point({std::cos(phi), std::sin(phi)});
    if (flip && a > 0) {
      const Point u = x / a;
      y = 2 * y.dot(u) * u - y;
    }
    const Point v = x - y;
    const double s = v.squaredNorm() > 0 ? -2 * y.dot(v) / v.squaredNorm() : 0.0;
    e.y = c + y + s * v;
    return e;
  }
  // d = 3: |X - y| has density proportional to s^-2 on [R - a, R + a]
  if (a < 1e-14 * R) {
    Point u = rng.on_sphere(3);
    e.y = c + R * (flip ? Point(-u) : u);
    return e;
  }
  const double u = rng.uniform();
  const double inv = 1.0 / (R - a) - u * (1.0 / (R - a) - 1.0 / (R + a));
  const double s = 1.0 / inv;
  const double cth = std::clamp((R * R + a * a - s * s) / (2 * a * R), -1.0, 1.0);
  const double sth = std::sqrt(std::max(0.0, 1 - cth * cth));
  double phi = 2 * kPi * rng.uniform();
  if (flip) phi += kPi;
  const Point e0 = x / a;
  Point e1 = std::abs(e0(0)) < 0.9 ? unit(3, 0) : unit(3, 1);
  e1 = (e1 - e1.dot(e0) * e0).normalized();
  const Point e2 = make_point({e0(1) * e1(2) - e0(2) * e1(1), e0(2) * e1(0) - e0(0) * e1(2),
                               e0(0) * e1(1) - e0(1) * e1(0)});
  e.y = c + R * (cth * e0 + sth * (std::cos(phi) * e1 + std::sin(phi) * e2));
  return e;
}

Exit generic_exit(const BoundaryModel& E, const Point& X, double eps, double R_kill, int max_steps, Rng& rng,
                  bool flip) {
  Point x = X;
  const int d = E.ambient_dim();
  Exit e;
  for (int step = 0; step < max_steps; ++step) {
    const Projection p = E.project(x);
    if (p.distance < eps) {
      e.y = p.foot;
      e.steps = step;
      return e;
    }
    if ((x - X).norm() > R_kill) break;
    Point u = rng.on_sphere(d);
    x += (flip ? -p.distance : p.distance) * u;
  }
  e.y = x;
  e.escaped = true;
  e.steps = max_steps;
  return e;
}

enum class Path { Generic, HalfSpace, Ball };

}  // namespace

namespace {

// Walk i from X under cfg; shared by the stored and streaming samplers.
struct Walker {
  const BoundaryModel& E;
  Point X;
  WalkConfig cfg;
  double eps = 0, R_kill = 0;
  Path path = Path::Generic;
  const SphereBoundary* sph = nullptr;
  const HyperplaneBoundary* hp = nullptr;

  Walker(const BoundaryModel& E_, const Point& X_, const WalkConfig& c) : E(E_), X(X_), cfg(c) {
    if (X.size() != E.ambient_dim()) throw ArgumentError("start point has the wrong dimension");
    if (!E.in_domain(X)) throw DomainError("walk start point is not in the domain");
    if (cfg.walks == 0) throw ArgumentError("walk count must be positive");
    if (cfg.max_steps < 1) throw ArgumentError("max steps must be at least 1");
    const double delta = E.project(X).distance;
    const double scale = cfg.scale > 0 ? cfg.scale : delta;
    eps = cfg.eps_shell > 0 ? cfg.eps_shell : 1e-3 * scale;
    if (!(delta > eps)) throw DomainError("start point lies within the absorption shell");
    R_kill = cfg.kill_factor * scale;
    if (cfg.fast_paths) {
      if ((hp = dynamic_cast<const HyperplaneBoundary*>(&E))) path = Path::HalfSpace;
      if ((sph = dynamic_cast<const SphereBoundary*>(&E)) && (E.ambient_dim() == 2 || E.ambient_dim() == 3))
        path = Path::Ball;
    }
  }

  Exit operator()(std::size_t i, bool antithetic) const {
    const std::size_t stream = antithetic ? i / 2 : i;
    Rng rng(derive_seed(cfg.seed, stream, 0x3a1c));
    return draw(rng, antithetic && (i % 2 == 1));
  }

  Exit draw(Rng& rng, bool flip) const {
    Exit e;
    switch (path) {
      case Path::HalfSpace:
        e = halfspace_exit(X, rng, flip);
        if (hp->has_patch() && !hp->base_box().contains(Point(e.y.head(E.ambient_dim() - 1)))) e.escaped = true;
        break;
      case Path::Ball:
        e = ball_exit(X, sph->center(), sph->radius(), rng, flip);
        break;
      case Path::Generic:
        e = generic_exit(E, X, eps, R_kill, cfg.max_steps, rng, flip);
        break;
    }
    return e;
  }
};

}  // namespace

ExitSample sample_exits(const BoundaryModel& E, const Point& X, const WalkConfig& cfg, bool antithetic) {
  Walker w(E, X, cfg);
  ExitSample s;
  s.X = X;
  s.eps_shell = w.eps;
  s.seed = cfg.seed;
  s.exact = w.path != Path::Generic;
  s.antithetic = antithetic;
  std::size_t n = cfg.walks;
  if (antithetic && n % 2) ++n;
  s.exits.assign(n, Point());
  s.escaped.assign(n, 0);
  std::vector<double> steps(n, 0.0);
  parallel_for(
      n,
      [&](std::size_t i) {
        Exit e = w(i, antithetic);
        s.exits[i] = e.y;
        s.escaped[i] = e.escaped;
        steps[i] = e.steps;
      },
      cfg.workers);
  for (auto b : s.escaped) s.n_escaped += b;
  s.mean_steps = pairwise_sum(steps) / double(n);
  return s;
}

MeasureEstimate count_exits(const BoundaryModel& E, const Point& X, const std::function<bool(const Point&)>& target,
                            const WalkConfig& cfg) {
  Walker w(E, X, cfg);
  const std::size_t n = cfg.walks, block = 1 << 14;
  const std::size_t nb = (n + block - 1) / block;
  std::vector<double> hits(nb, 0.0), esc(nb, 0.0);
  parallel_for(
      nb,
      [&](std::size_t b) {
        // one stream per fixed block keeps counts independent of scheduling
        Rng rng(derive_seed(cfg.seed, b, 0x3a1d));
        for (std::size_t i = b * block; i < std::min(n, (b + 1) * block); ++i) {
          Exit e = w.draw(rng, false);
          if (e.escaped)
            esc[b] += 1;
          else if (target(e.y))
            hits[b] += 1;
        }
      },
      cfg.workers);
  MeasureEstimate m;
  m.walks = n;
  m.seed = cfg.seed;
  const double p = pairwise_sum(hits) / double(n);
  m.mean = p;
  m.std_err = n > 1 ? std::sqrt(p * (1 - p) / double(n - 1)) : 0.0;
  m.escaped = pairwise_sum(esc) / double(n);
  m.escape_warning = m.escaped > 0.01;
  return m;
}

nlohmann::json MeasureEstimate::to_json() const {
  return {{"mean", mean}, {"stderr", std_err}, {"walks", walks}, {"escaped", escaped}, {"seed", seed},
          {"escape_warning", escape_warning}};
}

MeasureEstimate walk_average(const ExitSample& s, const std::function<double(std::size_t)>& value) {
  const std::size_t n = s.size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = value(i);
  std::vector<double> units;
  if (s.antithetic) {
    units.resize(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) units[j] = 0.5 * (v[2 * j] + v[2 * j + 1]);
  } else {
    units = std::move(v);
  }
  const std::size_t m = units.size();
  MeasureEstimate est;
  est.mean = pairwise_sum(units) / double(m);
  std::vector<double> sq(m);
  for (std::size_t i = 0; i < m; ++i) sq[i] = (units[i] - est.mean) * (units[i] - est.mean);
  const double var = m > 1 ? pairwise_sum(sq) / double(m - 1) : 0.0;
  est.std_err = std::sqrt(var / double(m));
  est.walks = n;
  est.escaped = s.escaped_fraction();
  est.seed = s.seed;
  est.escape_warning = est.escaped > 0.01;
  return est;
}

MeasureEstimate measure_of(const ExitSample& s, const std::function<bool(const Point&)>& target) {
  return walk_average(s, [&](std::size_t i) { return !s.escaped[i] && target(s.exits[i]) ? 1.0 : 0.0; });
}

MeasureEstimate measure_of(const ExitSample& s, const SurfaceBall& D) {
  return measure_of(s, [&](const Point& y) { return (y - D.center).norm() < D.radius; });
}

MeasureEstimate wos_harmonic_measure(const BoundaryModel& E, const Point& X, const SurfaceBall& D,
                                     const WalkConfig& cfg) {
  return measure_of(sample_exits(E, X, cfg), D);
}

// ---------------------------------------------------------------------------

nlohmann::json DensityEstimate::to_json() const {
  return {{"value", value}, {"stderr", std_err}, {"at_s", at_s}, {"at_half", at_half}, {"s", s},
          {"walks", walks}, {"low_confidence", low_confidence}};
}

DensityEstimate poisson_density(const BoundaryModel& E, const ExitSample& s, const Point& y, double radius) {
  if (!(radius >= 5 * s.eps_shell)) throw ArgumentError("density radius must be at least 5 eps_shell");
  const double sig1 = E.measure_in_ball(y, radius), sig2 = E.measure_in_ball(y, 0.5 * radius);
  if (!(sig1 > 0) || !(sig2 > 0)) throw DomainError("density point is not on E");
  DensityEstimate d;
  d.s = radius;
  auto one = measure_of(s, SurfaceBall{y, radius});
  auto half = measure_of(s, SurfaceBall{y, 0.5 * radius});
  d.at_s = one.mean / sig1;
  d.at_half = half.mean / sig2;
  // averages over Delta(y, s) are k(y) + O(s^2)
  auto rich = walk_average(s, [&](std::size_t i) {
    if (s.escaped[i]) return 0.0;
    const double r = (s.exits[i] - y).norm();
    return (4.0 * (r < 0.5 * radius) / sig2 - (r < radius) / sig1) / 3.0;
  });
  d.value = rich.mean;
  d.std_err = rich.std_err;
  d.walks = s.size();
  d.low_confidence = !(d.std_err <= 0.25 * std::abs(d.value));
  return d;
}

DensityEstimate poisson_density(const BoundaryModel& E, const Point& X, const Point& y, double s,
                                const WalkConfig& cfg) {
  return poisson_density(E, sample_exits(E, X, cfg), y, s);
}

// ---------------------------------------------------------------------------

nlohmann::json GreenEstimate::to_json() const {
  return {{"value", value}, {"stderr", std_err}, {"fundamental", fundamental}, {"boundary_term", boundary_term},
          {"walks", walks}, {"escaped", escaped}};
}

GreenSampler::GreenSampler(const BoundaryModel& E, const Point& pole, const WalkConfig& cfg)
    : E_(&E), P_(pole), G_{E.ambient_dim()}, s_(sample_exits(E, pole, cfg, true)) {}

GreenEstimate GreenSampler::value(const Point& X) const {
  if ((X - P_).norm() < s_.eps_shell) throw ArgumentError("Green function points closer than eps_shell");
  GreenEstimate g;
  g.fundamental = G_.value(X - P_);
  // escaped walks are taken to infinity, where E vanishes (d >= 3)
  auto b = walk_average(s_, [&](std::size_t i) { return s_.escaped[i] ? 0.0 : G_.value(X - s_.exits[i]); });
  g.boundary_term = b.mean;
  g.value = g.fundamental - b.mean;
  g.std_err = b.std_err;
  g.walks = b.walks;
  g.escaped = b.escaped;
  return g;
}

Point GreenSampler::gradient(const Point& X) const {
  const int d = E_->ambient_dim();
  Point g = G_.gradient(X - P_);
  for (int j = 0; j < d; ++j)
    g(j) -= walk_average(s_, [&](std::size_t i) { return s_.escaped[i] ? 0.0 : G_.gradient(X - s_.exits[i])(j); })
                .mean;
  return g;
}

GreenEstimate green_function(const BoundaryModel& E, const Point& X, const Point& Y, const WalkConfig& cfg) {
  const double eps = cfg.eps_shell > 0 ? cfg.eps_shell : 1e-3 * (cfg.scale > 0 ? cfg.scale : E.project(Y).distance);
  if ((X - Y).norm() < eps) throw ArgumentError("Green function points closer than eps_shell");
  if (!E.in_domain(X)) throw DomainError("Green function argument is not in the domain");
  return GreenSampler(E, Y, cfg).value(X);
}

nlohmann::json SymmetryReport::to_json() const {
  return {{"G_xy", xy.to_json()}, {"G_yx", yx.to_json()}, {"diff", diff}, {"stderr", std_err}, {"pass", pass}};
}

SymmetryReport green_symmetry(const BoundaryModel& E, const Point& X, const Point& Y, const WalkConfig& cfg) {
  SymmetryReport r;
  WalkConfig c2 = cfg;
  c2.seed = derive_seed(cfg.seed, 1, 0x5e);
  r.xy = green_function(E, X, Y, cfg);
  r.yx = green_function(E, Y, X, c2);
  r.diff = r.xy.value - r.yx.value;
  r.std_err = std::hypot(r.xy.std_err, r.yx.std_err);
  r.pass = std::abs(r.diff) <= 3 * r.std_err;
  return r;
}

// ---------------------------------------------------------------------------

nlohmann::json BourgainReport::to_json() const {
  return {{"x", std::vector<double>(x.data(), x.data() + x.size())},
          {"r", r},
          {"c", c},
          {"samples", samples},
          {"min", min},
          {"min_stderr", min_se},
          {"C", C},
          {"X_delta", std::vector<double>(X_delta.data(), X_delta.data() + X_delta.size())},
          {"at_corkscrew", at_corkscrew},
          {"at_corkscrew_stderr", at_corkscrew_se}};
}

BourgainReport bourgain_check(const BoundaryModel& E, const Point& x, double r, double c, const WalkConfig& cfg,
                              int samples) {
  if (!(r < E.diameter())) throw PreconditionError("Bourgain check needs r < diam E");
  if (!(c > 0 && c < 1)) throw ArgumentError("Bourgain constant c must lie in (0, 1)");
  BourgainReport rep;
  rep.x = x;
  rep.r = r;
  rep.c = c;
  const int d = E.ambient_dim();
  const SurfaceBall D{x, r};
  WalkConfig wc = cfg;
  wc.scale = r;
  Rng rng(derive_seed(cfg.seed, 0, 0xb0));
  rep.min = kInf;
  int tries = 0;
  while (static_cast<int>(rep.samples) < samples && tries < 200 * samples) {
    ++tries;
    Point Y = x + c * r * rng.in_ball(d);
    if (!E.in_domain(Y) || E.project(Y).distance <= 10 * 1e-3 * r) continue;
    wc.seed = derive_seed(cfg.seed, rep.samples + 1, 0xb1);
    auto m = measure_of(sample_exits(E, Y, wc), D);
    if (m.mean < rep.min) {
      rep.min = m.mean;
      rep.min_se = m.std_err;
    }
    ++rep.samples;
  }
  if (rep.samples == 0) throw PreconditionError("no domain points in B(x, c r)");
  rep.C = rep.min > 0 ? 1.0 / rep.min : kInf;
  auto ck = corkscrew(E, x, r);
  rep.X_delta = ck.X;
  wc.seed = derive_seed(cfg.seed, 0, 0xb2);
  auto m = measure_of(sample_exits(E, ck.X, wc), D);
  rep.at_corkscrew = m.mean;
  rep.at_corkscrew_se = m.std_err;
  return rep;
}

nlohmann::json ComparisonReport::to_json() const {
  return {{"id", id},       {"lhs", lhs},           {"lhs_stderr", lhs_se}, {"rhs", rhs},
          {"rhs_stderr", rhs_se}, {"ratio", ratio}, {"ratio_lo", ratio_lo}, {"ratio_hi", ratio_hi},
          {"C", C},         {"pass", pass}};
}

ComparisonReport compare(std::string id, double a, double sa, double b, double sb, double C) {
  ComparisonReport r;
  r.id = std::move(id);
  r.lhs = a;
  r.lhs_se = sa;
  r.rhs = b;
  r.rhs_se = sb;
  r.C = C;
  r.ratio = b != 0 ? a / b : kInf;
  const double rel = std::hypot(a != 0 ? sa / a : 0.0, b != 0 ? sb / b : 0.0);
  r.ratio_lo = r.ratio * std::max(0.0, 1 - 3 * rel);
  r.ratio_hi = r.ratio * (1 + 3 * rel);
  r.pass = std::isfinite(r.ratio) && r.ratio_hi >= 1.0 / C && r.ratio_lo <= C;
  return r;
}

ComparisonReport cfms_check(const BoundaryModel& E, const SurfaceBall& D, const Point& X, const WalkConfig& cfg,
                            double C) {
  if ((X - D.center).norm() < 4 * D.radius) throw PreconditionError("CFMS needs X outside 4B (X in Omega minus B0)");
  const int n = E.dim();
  auto ck = corkscrew(E, D.center, D.radius);
  WalkConfig wc = cfg;
  GreenSampler G(E, X, wc);
  auto g = G.value(ck.X);
  auto w = measure_of(G.exits(), D);
  const double scale = std::pow(D.radius, n - 1);
  return compare("cfms", w.mean, w.std_err, scale * g.value, scale * g.std_err, C);
}

ComparisonReport doubling_check(const BoundaryModel& E, const SurfaceBall& D, const Point& X, const WalkConfig& cfg,
                                double C) {
  if ((X - D.center).norm() < 4 * D.radius) throw PreconditionError("doubling needs X outside 4B");
  auto s = sample_exits(E, X, cfg);
  auto big = measure_of(s, SurfaceBall{D.center, 2 * D.radius});
  auto small = measure_of(s, D);
  auto r = compare("doubling", big.mean, big.std_err, small.mean, small.std_err, C);
  r.pass = std::isfinite(r.ratio) && r.ratio_lo <= C;
  return r;
}

ComparisonReport pole_change_check(const BoundaryModel& E, const SurfaceBall& Dp, const SurfaceBall& D, const Point& X,
                                   const WalkConfig& cfg, double C) {
  if ((Dp.center - D.center).norm() + Dp.radius > D.radius * (1 + 1e-12))
    throw PreconditionError("pole change needs Delta' inside Delta");
  if ((X - D.center).norm() < 2 * D.radius) throw PreconditionError("pole change needs X outside 2B");
  auto s = sample_exits(E, X, cfg);
  // omega^X(D') / omega^X(D) per walk is a ratio estimator; use the delta method
  auto a = measure_of(s, Dp), b = measure_of(s, D);
  const double q = b.mean > 0 ? a.mean / b.mean : 0.0;
  // conditional proportion of D' among the walks that hit D
  const double m = b.mean * double(s.size());
  const double qse = m > 1 ? std::sqrt(q * (1 - q) / m) : kInf;
  auto ck = corkscrew(E, D.center, D.radius);
  WalkConfig wc = cfg;
  wc.seed = derive_seed(cfg.seed, 2, 0x9c);
  auto w = measure_of(sample_exits(E, ck.X, wc), Dp);
  return compare("pole_change", q, qse, w.mean, w.std_err, C);
}

}  // namespace rectilab
