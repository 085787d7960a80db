#include <doctest.h>

#include "rectilab/functionals.hpp"

#include <set>

using namespace rectilab;

namespace {

struct Plane {
  BoundaryPtr E;
  GridPtr g;
  ConeContext ctx;
  explicit Plane(int d = 3, bool exterior = true) {
    E = std::make_shared<HyperplaneBoundary>(d, 2.0);
    g = build_grid(E, 0, 5);
    ctx = cone_context(g, 16.0, {}, exterior);
  }
  CubeRef cube(const Point& x, int k) const { return *g->ref_at(x, k); }
};

Point on_plane(double a, double b) { return make_point({a, b, 0}); }

// omega^X of the rectangle [x1, x2] x [y1, y2] on the plane {t = 0}, by solid angles.
double rectangle_measure(const Point& X, double x1, double x2, double y1, double y2) {
  const double t = X(2);
  auto corner = [&](double x, double y) {
    x -= X(0);
    y -= X(1);
    return std::atan(x * y / (t * std::sqrt(x * x + y * y + t * t)));
  };
  return (corner(x2, y2) - corner(x1, y2) - corner(x2, y1) + corner(x1, y1)) / (2 * kPi);
}

// Poisson extension of the indicator of [a, b] to the upper half-plane.
HarmonicField interval_extension(double a, double b) {
  HarmonicField f;
  f.name = "interval";
  f.u = [=](const Point& X) { return (std::atan((b - X(0)) / X(1)) - std::atan((a - X(0)) / X(1))) / kPi; };
  f.grad = [=](const Point& X) {
    const double x = X(0), t = X(1);
    const double rb = t * t + (b - x) * (b - x), ra = t * t + (a - x) * (a - x);
    return make_point({(-t / rb + t / ra) / kPi, (-(b - x) / rb + (a - x) / ra) / kPi});
  };
  return f;
}

}  // namespace

TEST_CASE("cone inclusions, truncation and splitting") {
  Plane P;
  const Point x = on_plane(0.1, 0.1);
  const CubeRef Q0 = P.cube(x, 2);
  DyadicCone lam(P.ctx, Q0, x, ConeVariant::Lambda, 4);
  DyadicCone gam(P.ctx, Q0, x, ConeVariant::Gamma, 4);
  DyadicCone gt(P.ctx, Q0, x, ConeVariant::GammaTilde, 4);
  REQUIRE(!lam.cubes().empty());
  bool in = true;
  for (const auto& I : lam.cubes()) in = in && gam.contains(I.center()) && gt.contains(I.center());
  for (std::size_t i = 0; i < gam.cubes().size(); i += 7) in = in && gt.contains(gam.box(i).lo);
  CHECK(in);
  CHECK(gam.dilation() == doctest::Approx(1.05));
  CHECK(gt.dilation() == doctest::Approx(1.1));

  // the cone of Q0 is W_{Q0} plus the cone of the child containing x
  DyadicCone child(P.ctx, P.cube(x, 3), x, ConeVariant::Lambda, 4);
  std::set<WhitneyCube> split(child.cubes().begin(), child.cubes().end());
  for (const auto& I : w_q(*P.g, *P.ctx.W, Q0, P.ctx.region.wq)) split.insert(I);
  CHECK(std::vector<WhitneyCube>(split.begin(), split.end()) == lam.cubes());

  // levels record the coarsest contributing generation
  std::size_t top = 0;
  for (int k : lam.levels()) top += k == 2;
  CHECK(top == w_q(*P.g, *P.ctx.W, Q0, P.ctx.region.wq).size());

  // shallower truncation gives a sub-cone
  DyadicCone short_cone(P.ctx, Q0, x, ConeVariant::Lambda, 3);
  CHECK(std::includes(lam.cubes().begin(), lam.cubes().end(), short_cone.cubes().begin(), short_cone.cubes().end()));

  // exterior cones live below the plane
  DyadicCone ext(P.ctx, Q0, x, ConeVariant::LambdaExt, 3);
  bool below = true;
  for (const auto& I : ext.cubes()) below = below && I.center()(2) < 0;
  CHECK(below);
  DyadicCone two(P.ctx, Q0, x, ConeVariant::LambdaTwoSided, 3);
  CHECK(two.cubes().size() == ext.cubes().size() + short_cone.cubes().size());

  CHECK_THROWS_AS(DyadicCone(P.ctx, Q0, on_plane(0.9, 0.9), ConeVariant::Gamma, 4), ArgumentError);
  CHECK_THROWS_AS(DyadicCone(P.ctx, Q0, x, ConeVariant::Gamma, 1), ArgumentError);
  CHECK(cone_variant_from_string("gamma-tilde") == ConeVariant::GammaTilde);
  CHECK_THROWS_AS(cone_variant_from_string("delta"), ArgumentError);
}

TEST_CASE("square and maximal functions of simple fields") {
  Plane P;
  const Point x = on_plane(0.1, 0.1);
  const CubeRef Q0 = P.cube(x, 2);
  DyadicCone gam(P.ctx, Q0, x, ConeVariant::Gamma, 4);
  DyadicCone gt(P.ctx, Q0, x, ConeVariant::GammaTilde, 4);

  auto c = HarmonicField::constant(-2.5);
  CHECK(square_function(c, gam) == 0.0);
  CHECK(nt_max(c, gt) == 2.5);

  // u = t: S^2 is the integral of 1 / t over the cone, exact per Whitney box
  auto u = HarmonicField::coordinate(2, 3);
  DyadicCone lam(P.ctx, Q0, x, ConeVariant::Lambda, 4);
  double exact = 0;
  for (const auto& I : lam.cubes()) {
    const Box b = I.box();
    exact += (b.hi(0) - b.lo(0)) * (b.hi(1) - b.lo(1)) * std::log(b.hi(2) / b.lo(2));
  }
  const double s3 = square_function(u, lam, 3);
  CHECK(s3 * s3 == doctest::Approx(exact).epsilon(2e-3));
  CHECK(std::abs(square_function(u, lam, 0) - std::sqrt(exact)) > std::abs(s3 - std::sqrt(exact)));

  // overlap weights keep the fattened cone near the union volume
  const double sg = square_function(u, gam, 2);
  CHECK(sg > s3);
  CHECK(sg * sg < exact * 1.05 * 1.05 * 1.05 * 1.2);

  // truncations are monotone in depth
  double prev = 0;
  for (int k = 2; k <= 4; ++k) {
    const double s = square_function(u, gam, 0, k);
    CHECK(s >= prev);
    prev = s;
  }
  CHECK(prev == doctest::Approx(square_function(u, gam, 0)));
  // the non-tangential maximum of t is the top of the cone
  double top = 0;
  for (std::size_t i = 0; i < gt.cubes().size(); ++i) top = std::max(top, gt.box(i).hi(2));
  CHECK(nt_max(u, gt, 1) <= top);
  CHECK(nt_max(u, gt, 1) >= 0.75 * top);

  // a pole inside the cone is rejected
  HarmonicField bad = u;
  bad.pole = gam.cubes().front().center();
  CHECK_THROWS_AS(square_function(bad, gam), ArgumentError);
}

TEST_CASE("non-tangential maximum of a Poisson extension") {
  auto E = std::make_shared<HyperplaneBoundary>(2, 2.0);
  auto g = build_grid(E, 0, 6);
  auto ctx = cone_context(g, 16.0, {}, false);
  auto u = interval_extension(-0.3, 0.4);
  auto hp = check_harmonic(u, {make_point({0.1, 0.2}), make_point({0.7, 0.05})}, 1e-4);
  CHECK(hp.pass);
  for (double a : {0.05, 0.3, 0.6}) {
    const Point x = make_point({a, 0});
    const CubeRef Q0 = *g->ref_at(x, 1);
    DyadicCone gt(ctx, Q0, x, ConeVariant::GammaTilde, 10);
    const double N = nt_max(u, gt, 1);
    CHECK(N <= 1.0);
    CHECK(N > 0.0);
    // boundary values are approached inside the interval
    if (a < 0.4) CHECK(N > 0.95);
  }
}

TEST_CASE("dyadic maximal function of a child indicator") {
  Plane P;
  const Point x = on_plane(0.1, 0.1);
  const CubeRef Q0 = P.cube(x, 2);
  const CubeRef C = P.cube(x, 3);
  auto f = [&](const Point& y) { return in_cube(*P.g, C, y) ? 1.0 : 0.0; };
  CHECK(dyadic_max(f, *P.g, Q0, x, 2) == doctest::Approx(0.25));
  CHECK(dyadic_max(f, *P.g, Q0, x, 4) == doctest::Approx(1.0));
  CHECK(dyadic_max(f, *P.g, Q0, on_plane(0.2, 0.2), 4) == doctest::Approx(0.25));
  CHECK_THROWS_AS(dyadic_max(f, *P.g, Q0, on_plane(0.7, 0.2), 4), ArgumentError);
}

TEST_CASE("good-lambda ratio of the height function is stable") {
  Plane P;
  auto u = HarmonicField::coordinate(2, 3);
  ConeSweepOptions opt;
  opt.depth = 2;
  opt.apexes = 2;
  std::vector<double> C;
  for (int k : {1, 2}) {
    auto r = good_lambda_experiment(u, P.ctx, P.cube(on_plane(0.1, 0.1), k), 2.0, opt);
    CHECK(r.pass);
    CHECK(r.sweep.size() == 3);
    CHECK(r.flags.empty());
    C.push_back(r.constant);
  }
  // the experiment is scale invariant on the plane
  CHECK(C[0] == doctest::Approx(C[1]).epsilon(1e-6));
  auto z = good_lambda_experiment(HarmonicField::constant(1), P.ctx, P.cube(on_plane(0.1, 0.1), 2), 2.0, opt);
  CHECK(z.constant == 0.0);
  CHECK(z.flags.size() == 1);
  CHECK_THROWS_AS(good_lambda_experiment(u, P.ctx, P.cube(on_plane(0.1, 0.1), 2), 1.0, opt), ArgumentError);
}

TEST_CASE("cone sweep shares evaluations across apexes") {
  Plane P;
  const CubeRef Q0 = P.cube(on_plane(0.1, 0.1), 2);
  auto u = HarmonicField::coordinate(2, 3);
  ConeSweepOptions opt;
  opt.depth = 1;
  opt.apexes = 2;
  auto a = cone_sweep(u, P.ctx, Q0, opt);
  REQUIRE(a.size() == 4);
  double w = 0;
  for (const auto& v : a) {
    w += v.weight;
    DyadicCone c(P.ctx, Q0, v.x, ConeVariant::Gamma, 3);
    CHECK(v.S.back() == doctest::Approx(square_function(u, c)).epsilon(1e-12));
    CHECK(v.S.front() <= v.S.back());
  }
  CHECK(w == doctest::Approx(cube_sigma(*P.g, Q0)));
}

TEST_CASE("smoothed Green derivative on the half-space") {
  HyperplaneBoundary E(3);
  const Point Pole = make_point({0, 0, 1});
  WalkConfig cfg;
  cfg.walks = 200000;
  const double beta = 1.0 / 6;
  ExitSmoothing sm{zeros(3), 1.0, beta, 0};
  auto u = green_derivative_field(E, Pole, 2, cfg, sm);
  FundamentalSolution Phi{3};
  const Point Img = make_point({0, 0, -1});
  for (const Point& Y : {make_point({0.3, 0.1, 0.4}), make_point({-0.5, 0.2, 0.3}), make_point({0.2, 0.2, 2.5})}) {
    const double exact = Phi.gradient(Y - Pole)(2) - Phi.gradient(Y - Img)(2);
    CHECK(u.u(Y) == doctest::Approx(exact).epsilon(0.05));
  }
  CHECK(check_harmonic(u, {make_point({0.3, 0.1, 0.4})}, 1e-3).pass);
  CHECK_FALSE(u.low_confidence);
  CHECK(u.meta["smoothed"].get<bool>());
}

TEST_CASE("reverse Hoelder on the half-space") {
  HyperplaneBoundary E(3);
  RhOptions opt;
  opt.walks.walks = 200000;
  auto r = rh_check(E, {zeros(3), 1.0}, 2.0, opt);
  // sigma(D) int_D k^2 with k the Poisson kernel from height 1/2
  const double t = 0.5;
  const double exact = (1 / (t * t) - t * t / ((1 + t * t) * (1 + t * t))) / 8;
  CHECK(std::abs(r.lhs - exact) <= 4 * r.std_err + 0.01);
  CHECK(r.rhs == doctest::Approx(std::pow(1 - t / std::sqrt(1 + t * t), 2)).epsilon(0.02));
  CHECK(r.constant == doctest::Approx(r.lhs / r.rhs));
  auto s = rh_check(E, {make_point({1, 2, 0}), 0.25}, 2.0, opt);
  CHECK(s.lhs == doctest::Approx(r.lhs).epsilon(1e-3));
  CHECK_THROWS_AS(rh_check(E, {zeros(3), 1.0}, 1.0, opt), ArgumentError);

  auto sw = rh_sweep(E, {zeros(3), 1.0}, 2.0, {0.25, 0.5}, 2, opt);
  CHECK(sw.sweep.size() == 4);
  CHECK(sw.pass);
}

TEST_CASE("A-infinity fit") {
  std::vector<double> sg(200, 0.5), om(200, 1.0 / 200);
  auto f = ainfty_fit(sg, om, 200, 3);
  CHECK(f.theta == doctest::Approx(1.0));
  CHECK(f.C == doctest::Approx(1.0));
  for (std::size_t i = 0; i < om.size(); ++i) om[i] = std::pow((i + 0.5) / 200.0, 2);
  auto a = ainfty_fit(sg, om, 200, 3);
  std::vector<double> om2 = om;
  for (double& w : om2) w *= 2;
  auto b = ainfty_fit(sg, om2, 200, 3);
  CHECK(a.theta == b.theta);
  CHECK(a.C == doctest::Approx(b.C));
  CHECK(a.theta > 0);
  bool bounded = true;
  for (auto [s, w] : a.pairs) bounded = bounded && w <= a.C * std::pow(s, a.theta) * (1 + 1e-12);
  CHECK(bounded);

  HyperplaneBoundary E(3);
  AinftyOptions opt;
  opt.walks.walks = 50000;
  auto r = ainfty_check(E, {zeros(3), 1.0}, opt);
  CHECK(r.pass);
  CHECK(r.lhs > 0.5);
  CHECK_THROWS_AS(ainfty_fit({}, {}, 10, 0), ArgumentError);
}

TEST_CASE("Tb geometry and conditions on the half-space") {
  Plane P;
  const Point x = on_plane(0.1, 0.1);
  TbOptions opt;
  opt.walks.walks = 20000;
  opt.count_walks = 2000000;
  opt.depth = 0;
  opt.apexes = 1;
  opt.exterior_samples = 100;
  std::vector<double> A0;
  for (int k : {2, 3}) {
    const CubeRef Q = P.cube(x, k);
    auto G = tb_geometry(P.ctx, Q);
    CHECK(G.kappa2 == doctest::Approx(12.0));
    CHECK(G.pole_outside);
    CHECK(G.X_hat(2) == doctest::Approx(G.B_hat.radius / 2));
    CHECK(G.kappa1 >= G.kappa0);
    CHECK(G.eta(G.x_Q) == 1.0);
    CHECK(G.eta(G.x_Q + make_point({5.01 * G.B_hat.radius, 0, 0})) == 0.0);

    auto r = tb_conditions(P.ctx, Q, opt);
    const Box& b = Q.region;
    const double w = rectangle_measure(G.X_hat, b.lo(0), b.hi(0), b.lo(1), b.hi(1));
    CHECK(std::abs(r.b - w) <= 4 * r.b_se);
    CHECK(r.A0 == doctest::Approx(1 / r.b));
    CHECK(r.ext_pass);
    A0.push_back(r.A0);
  }
  CHECK(A0[0] == doctest::Approx(A0[1]).epsilon(1e-9));
  TbOptions q1 = opt;
  q1.q = 1;
  CHECK_THROWS_AS(tb_conditions(P.ctx, P.cube(x, 2), q1), ArgumentError);
}

TEST_CASE("non-tangential bound for the Green derivative") {
  Plane P;
  NtGreenOptions opt;
  opt.walks.walks = 20000;
  opt.depth = 0;
  opt.apexes = 1;
  opt.spot_checks = 3;
  CHECK_THROWS_AS(nt_green_bound(P.ctx, P.cube(on_plane(0.1, 0.1), 2), 1.0, opt), ArgumentError);
  auto r = nt_green_bound(P.ctx, P.cube(on_plane(0.1, 0.1), 2), 2.0, opt);
  CHECK(std::isfinite(r.lhs));
  CHECK(r.lhs > 0);
  CHECK(r.extra["spot_hi"].get<double>() < 1e3);
}

TEST_CASE("cube helpers on a flat grid") {
  Plane P;
  const CubeRef Q = P.cube(on_plane(0.1, 0.1), 7);
  CHECK(Q.id == -1);
  CHECK(cube_sigma(*P.g, Q) == doctest::Approx(std::pow(2.0, -14)));
  auto n = cube_nodes(*P.g, Q, Q.side() / 4);
  CHECK(n.size() == 16);
  CHECK(n.total_weight() == doctest::Approx(cube_sigma(*P.g, Q)));
  CHECK(in_cube(*P.g, Q, Q.center));
  CHECK_FALSE(in_cube(*P.g, Q, Q.center + make_point({0, 0, 1e-3})));
}
