#include <doctest.h>

#include "rectilab/harmonic.hpp"

using namespace rectilab;

namespace {

// omega^x of the cap {angle(y, x) < alpha} of the unit sphere, by Simpson on
// the Poisson kernel (1 - a^2) / (4 pi |x - y|^3).
double ball_cap_measure(double a, double alpha) {
  const int M = 20000;
  double s = 0;
  for (int i = 0; i <= M; ++i) {
    double th = alpha * i / M;
    double w = (i == 0 || i == M) ? 1 : (i % 2 ? 4 : 2);
    s += w * (1 - a * a) / (4 * kPi * std::pow(1 + a * a - 2 * a * std::cos(th), 1.5)) * 2 * kPi * std::sin(th);
  }
  return s * alpha / (3 * M);
}

double disk_arc_measure(double a, double alpha) {
  const int M = 20000;
  double s = 0;
  for (int i = 0; i <= M; ++i) {
    double th = -alpha + 2 * alpha * i / M;
    double w = (i == 0 || i == M) ? 1 : (i % 2 ? 4 : 2);
    s += w * (1 - a * a) / (2 * kPi * (1 + a * a - 2 * a * std::cos(th)));
  }
  return s * 2 * alpha / (3 * M);
}

double halfspace_green(const Point& X, const Point& Y) {
  Point Yb = Y;
  Yb(2) = -Yb(2);
  return (1 / (X - Y).norm() - 1 / (X - Yb).norm()) / (4 * kPi);
}

bool within(double est, double se, double exact, double k = 3.0) { return std::abs(est - exact) <= k * se; }

}  // namespace

TEST_CASE("half-space harmonic measure of a disk") {
  HyperplaneBoundary plane(3);
  WalkConfig cfg;
  cfg.walks = 100000;
  auto m = wos_harmonic_measure(plane, make_point({0, 0, 1}), {zeros(3), 1.0}, cfg);
  CHECK(within(m.mean, m.std_err, 1 - 1 / std::sqrt(2.0)));
  CHECK(m.std_err <= 5e-3);
  CHECK(m.escaped == 0.0);
  // whole window
  auto all = wos_harmonic_measure(plane, make_point({0, 0, 1}), {zeros(3), 1e6}, cfg);
  CHECK(all.mean > 0.9999);

  // the generic walk agrees up to the shell bias
  WalkConfig g = cfg;
  g.fast_paths = false;
  g.walks = 20000;
  auto w = wos_harmonic_measure(plane, make_point({0, 0, 1}), {zeros(3), 1.0}, g);
  CHECK(within(w.mean, w.std_err, 1 - 1 / std::sqrt(2.0), 4.0));
  CHECK(w.escaped < 0.05);
  CHECK_THROWS_AS(wos_harmonic_measure(plane, make_point({0, 0, -1}), {zeros(3), 1.0}, cfg), DomainError);
}

TEST_CASE("ball harmonic measure") {
  SphereBoundary sph(3, zeros(3), 1.0);
  WalkConfig cfg;
  cfg.walks = 50000;
  Point north = make_point({0, 0, 1});
  for (double r : {0.5, 1.0, 1.7}) {
    auto m = wos_harmonic_measure(sph, zeros(3), {north, r}, cfg);
    CHECK(within(m.mean, m.std_err, sph.measure_in_ball(north, r) / (4 * kPi)));
  }
  // off-centre pole against quadrature of the Poisson kernel; chord r gives angle 2 asin(r / 2)
  for (double a : {0.3, 0.8}) {
    auto m = wos_harmonic_measure(sph, make_point({0, 0, a}), {north, 0.6}, cfg);
    CHECK(within(m.mean, m.std_err, ball_cap_measure(a, 2 * std::asin(0.3))));
    WalkConfig g = cfg;
    g.fast_paths = false;
    g.walks = 10000;
    auto w = wos_harmonic_measure(sph, make_point({0, 0, a}), {north, 0.6}, g);
    CHECK(within(w.mean, w.std_err, ball_cap_measure(a, 2 * std::asin(0.3)), 4.0));
  }
  SphereBoundary disk(2, zeros(2), 1.0);
  auto m = wos_harmonic_measure(disk, make_point({0.5, 0}), {make_point({1, 0}), std::sqrt(2.0)}, cfg);
  CHECK(within(m.mean, m.std_err, disk_arc_measure(0.5, kPi / 2)));
}

TEST_CASE("walk statistics: partitions, determinism, convergence") {
  HyperplaneBoundary plane(3);
  WalkConfig cfg;
  cfg.walks = 20000;
  cfg.fast_paths = false;
  auto s = sample_exits(plane, make_point({0.2, 0.1, 0.5}), cfg);
  // disjoint annuli partition the plane
  double total = 0;
  std::vector<double> edges{0, 0.5, 1, 2, 4, 8, 1e9};
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    total += measure_of(s, [&](const Point& y) {
               double r = y.head(2).norm();
               return r >= edges[i] && r < edges[i + 1];
             }).mean;
  CHECK(total == doctest::Approx(1 - s.escaped_fraction()).epsilon(1e-12));

  WalkConfig c1 = cfg, c4 = cfg;
  c1.workers = 1;
  c4.workers = 4;
  auto a = sample_exits(plane, make_point({0.2, 0.1, 0.5}), c1);
  auto b = sample_exits(plane, make_point({0.2, 0.1, 0.5}), c4);
  REQUIRE(a.size() == b.size());
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) same = same && a.exits[i] == b.exits[i];
  CHECK(same);

  WalkConfig f;
  f.walks = 10000;
  auto e1 = wos_harmonic_measure(plane, make_point({0, 0, 1}), {zeros(3), 1.0}, f);
  f.walks = 40000;
  auto e4 = wos_harmonic_measure(plane, make_point({0, 0, 1}), {zeros(3), 1.0}, f);
  CHECK(e1.std_err / e4.std_err == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("Poisson kernel density") {
  HyperplaneBoundary plane(3);
  WalkConfig cfg;
  cfg.walks = 200000;
  auto s = sample_exits(plane, make_point({0, 0, 1}), cfg);
  auto k0 = poisson_density(plane, s, zeros(3), 0.2);
  CHECK(within(k0.value, k0.std_err, 1 / (2 * kPi), 4.0));
  CHECK_FALSE(k0.low_confidence);
  auto k2 = poisson_density(plane, s, make_point({2, 0, 0}), 0.4);
  CHECK(within(k2.value, k2.std_err, std::pow(5.0, -1.5) / (2 * kPi), 4.0));
  SphereBoundary sph(3, zeros(3), 1.0);
  auto kb = poisson_density(sph, zeros(3), make_point({0, 0, 1}), 0.3, cfg);
  CHECK(within(kb.value, kb.std_err, 1 / (4 * kPi), 4.0));
  CHECK_THROWS_AS(poisson_density(plane, s, zeros(3), 1e-4), ArgumentError);
}

TEST_CASE("Green function on the half-space") {
  HyperplaneBoundary plane(3);
  WalkConfig cfg;
  cfg.walks = 100000;
  auto g = green_function(plane, make_point({0, 0, 1}), make_point({0, 0, 2}), cfg);
  CHECK(within(g.value, g.std_err, 1 / (6 * kPi)));
  CHECK(g.fundamental == doctest::Approx(1 / (4 * kPi)));
  auto sym = green_symmetry(plane, make_point({0.3, 0, 1}), make_point({0, 0.2, 2.5}), cfg);
  CHECK(sym.pass);
  CHECK(within(sym.xy.value, sym.xy.std_err, halfspace_green(make_point({0.3, 0, 1}), make_point({0, 0.2, 2.5}))));
  // vanishing at the boundary
  auto gb = green_function(plane, make_point({0, 0, 1}), make_point({0.5, 0, 0.01}), cfg);
  CHECK(std::abs(gb.value) < 0.02 * (1 / (4 * kPi * 0.5)));
  // lower bound c |X - Y|^{1-n} for |X - Y| <= delta(X) / 2
  Point X = make_point({0, 0, 1});
  for (double t : {0.1, 0.3, 0.5}) {
    auto gl = green_function(plane, X, make_point({t, 0, 1}), cfg);
    CHECK(gl.value * t > 0.05);
  }
  CHECK_THROWS_AS(green_function(plane, X, X, cfg), ArgumentError);

  // the sampler's gradient is the derivative of its value
  GreenSampler S(plane, make_point({0, 0, 2}), cfg);
  Point Y = make_point({0.4, 0.1, 0.7});
  Point fd(3);
  for (int i = 0; i < 3; ++i) {
    Point e = 1e-5 * unit(3, i);
    fd(i) = (S.value(Y + e).value - S.value(Y - e).value) / 2e-5;
  }
  CHECK((S.gradient(Y) - fd).norm() < 1e-6);
}

TEST_CASE("Bourgain, CFMS, doubling and change of pole on the half-space") {
  HyperplaneBoundary plane(3);
  WalkConfig cfg;
  cfg.walks = 20000;
  auto b = bourgain_check(plane, zeros(3), 1.0, 0.1, cfg, 8);
  CHECK(b.min >= 0.9);
  CHECK(b.at_corkscrew >= 0.25);
  CHECK(b.X_delta(2) == doctest::Approx(0.5));

  cfg.walks = 100000;
  auto c = cfms_check(plane, {zeros(3), 1.0}, make_point({0, 0, 8}), cfg);
  CHECK(c.pass);
  // oracle: ratio from closed forms
  double w = 1 - 8 / std::sqrt(65.0);
  double g = halfspace_green(make_point({0, 0, 0.5}), make_point({0, 0, 8}));
  CHECK(c.ratio == doctest::Approx(w / g).epsilon(0.1));

  auto dbl = doubling_check(plane, {zeros(3), 1.0}, make_point({0, 0, 8}), cfg);
  CHECK(dbl.pass);
  CHECK(dbl.ratio <= 4.0);
  auto pc = pole_change_check(plane, {zeros(3), 0.25}, {zeros(3), 1.0}, make_point({0, 0, 16}), cfg);
  CHECK(pc.pass);
  CHECK_THROWS_AS(cfms_check(plane, {zeros(3), 1.0}, make_point({0, 0, 2}), cfg), PreconditionError);
  CHECK_THROWS_AS(pole_change_check(plane, {make_point({0.9, 0, 0}), 0.25}, {zeros(3), 1.0}, make_point({0, 0, 16}), cfg),
                  PreconditionError);
}
