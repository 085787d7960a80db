#include <doctest.h>

#include "rectilab/potential.hpp"
#include "rectilab/rng.hpp"

using namespace rectilab;

namespace {

// Gauss-Legendre nodes on [a, b] via Newton on P_n.
std::vector<std::pair<double, double>> gauss(int n, double a, double b) {
  std::vector<std::pair<double, double>> out;
  for (int i = 1; i <= n; ++i) {
    double x = std::cos(kPi * (i - 0.25) / (n + 0.5)), dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2 / ((1 - x * x) * dp * dp);
    out.push_back({0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w});
  }
  return out;
}

// Brute single layer of density 1 on [-1,1]^2 x {0}, split into tiles.
double brute_rect(const Point& X) {
  double s = 0;
  const int T = 8;
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j) {
      auto gu = gauss(12, -1 + 2.0 * i / T, -1 + 2.0 * (i + 1) / T);
      auto gv = gauss(12, -1 + 2.0 * j / T, -1 + 2.0 * (j + 1) / T);
      for (auto [u, wu] : gu)
        for (auto [v, wv] : gv) s += wu * wv / (4 * kPi * std::hypot(X(0) - u, X(1) - v, X(2)));
    }
  return s;
}

template <typename F>
Point fd_grad(F f, const Point& X, double h) {
  Point g(X.size());
  for (int i = 0; i < X.size(); ++i) {
    Point e = h * unit(static_cast<int>(X.size()), i);
    g(i) = (f(X + e) - f(X - e)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("fundamental solution derivatives") {
  for (int d : {2, 3, 4}) {
    FundamentalSolution G{d};
    Point X = make_point({0.3, -0.7, 0.4, 0.2}).head(d);
    auto v = [&](const Point& Y) { return G.value(Y); };
    CHECK((G.gradient(X) - fd_grad(v, X, 1e-5)).norm() < 1e-8);
    Hessian H = G.hessian(X);
    Hessian Hfd(d, d);
    for (int i = 0; i < d; ++i) {
      Point e = 1e-5 * unit(d, i);
      Hfd.col(i) = (G.gradient(X + e) - G.gradient(X - e)) / 2e-5;
    }
    CHECK((H - Hfd).norm() < 1e-7);
    CHECK(std::abs(H.trace()) < 1e-12);
    // Flux through a sphere of radius r: |grad E| |S| r^{d-1} = 1.
    for (double r : {0.5, 3.0})
      CHECK(G.gradient(r * unit(d, 0)).norm() * unit_sphere_area(d) * std::pow(r, d - 1) == doctest::Approx(1.0));
  }
}

TEST_CASE("rectangle panels against brute quadrature and finite differences") {
  HyperplaneBoundary patch(3, make_point({-1, -1}), make_point({1, 1}));
  SingleLayer S(patch, Density::one());
  CHECK(S.panels() == 1);
  CHECK(S.mass() == doctest::Approx(4.0));
  for (Point X : {make_point({0.3, 0.2, 0.5}), make_point({1.7, -0.4, 0.3}), make_point({-0.9, 0.95, -0.2})}) {
    auto r = S.evaluate(X, 2);
    CHECK(r.value == doctest::Approx(brute_rect(X)).epsilon(1e-8));
    auto v = [&](const Point& Y) { return S.value(Y); };
    CHECK((r.gradient - fd_grad(v, X, 1e-5)).norm() < 1e-4 * r.gradient.norm());
    Hessian Hfd(3, 3);
    for (int i = 0; i < 3; ++i) {
      Point e = 1e-5 * unit(3, i);
      Hfd.col(i) = (S.gradient(X + e) - S.gradient(X - e)) / 2e-5;
    }
    CHECK((r.hessian - Hfd).norm() < 1e-4 * r.hessian.norm());
    CHECK((r.hessian - r.hessian.transpose()).norm() < 1e-8);
    CHECK(std::abs(r.hessian.trace()) < 1e-8 * r.hessian.norm());
  }
  // Corners and edges evaluated from directly above.
  auto c = S.evaluate(make_point({1, 1, 1e-3}), 2);
  CHECK(std::isfinite(c.hessian.norm()));
  CHECK_THROWS_AS(S.evaluate(make_point({0.2, 0.2, 0}), 0), ProximityError);
}

TEST_CASE("segments in the plane") {
  HyperplaneBoundary patch(2, make_point({-1}), make_point({1}));
  SingleLayer S(patch, Density::one());
  Point X = make_point({0.4, 0.3});
  double brute = 0;
  for (int t = 0; t < 16; ++t)
    for (auto [u, w] : gauss(16, -1 + t / 8.0, -1 + (t + 1) / 8.0))
      brute += -w * std::log(std::hypot(X(0) - u, X(1))) / (2 * kPi);
  auto r = S.evaluate(X, 2);
  CHECK(r.value == doctest::Approx(brute).epsilon(1e-10));
  auto v = [&](const Point& Y) { return S.value(Y); };
  CHECK((r.gradient - fd_grad(v, X, 1e-5)).norm() < 1e-6);
  CHECK(std::abs(r.hessian.trace()) < 1e-10);
}

TEST_CASE("shell theorem on spheres") {
  SphereBoundary sph(3, zeros(3), 1.0);
  LayerOptions direct;
  direct.theta = 0;
  SingleLayer S(sph, Density::one(), direct);
  CHECK(S.mass() == doctest::Approx(4 * kPi).epsilon(1e-12));
  auto out = S.evaluate(make_point({0, 1.2, 1.6}), 2);
  CHECK(out.value == doctest::Approx(0.5).epsilon(1e-6));
  auto in = S.evaluate(make_point({0.3, -0.2, 0.1}), 2);
  CHECK(in.value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(in.hessian.norm() < 1e-5);
  // Close to the surface the adaptive panels keep the interior field flat.
  auto near = S.evaluate(make_point({0, 0, 0.99}), 1);
  CHECK(near.value == doctest::Approx(1.0).epsilon(1e-4));

  SphereBoundary circ(2, zeros(2), 1.0);
  SingleLayer C(circ, Density::one(), direct);
  CHECK(C.evaluate(make_point({0.2, 0.1}), 0).value == doctest::Approx(0.0).scale(1).epsilon(1e-8));
  CHECK(C.evaluate(make_point({0, 3}), 0).value == doctest::Approx(-std::log(3.0)).epsilon(1e-8));
}

TEST_CASE("sampled boundaries fall back to point panels") {
  auto g = builtin_boundary("lipschitz-tent");
  LayerOptions lo;
  lo.h = 0.05;
  SingleLayer S(*g, Density::one(), lo);
  CHECK(S.panels() > 100);
  CHECK(S.margin() > 0);
  Point X = make_point({0.1, 0.2, 3.0});
  auto v = [&](const Point& Y) { return S.value(Y); };
  CHECK((S.gradient(X) - fd_grad(v, X, 1e-4)).norm() < 1e-6);
  // Treecode against direct summation.
  LayerOptions direct = lo;
  direct.theta = 0;
  SingleLayer D(*g, Density::one(), direct);
  auto a = S.evaluate(X, 2), b = D.evaluate(X, 2);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-3));
  CHECK((a.hessian - b.hessian).norm() < 1e-2 * b.hessian.norm());
}

TEST_CASE("varying densities on flat panels") {
  HyperplaneBoundary patch(3, make_point({-1, -1}), make_point({1, 1}));
  LayerOptions lo;
  lo.h = 0.02;
  lo.theta = 0;
  auto f = Density::of([](const Point& y) { return y(0) > 0 ? 1.0 : 0.0; });
  SingleLayer S(patch, f, lo);
  CHECK(S.mass() == doctest::Approx(2.0));
  CHECK(S.norm2() == doctest::Approx(2.0));
  // Reflection in x0 swaps the halves: S f(X) + S f(RX) = S 1(X).
  SingleLayer one(patch, Density::one());
  Point X = make_point({0.3, 0.1, 0.2}), RX = make_point({-0.3, 0.1, 0.2});
  CHECK(S.value(X) + S.value(RX) == doctest::Approx(one.value(X)).epsilon(1e-10));
}

TEST_CASE("truncated plane has a vanishing Hessian") {
  HyperplaneBoundary plane(3);
  const Point X = make_point({0.1, -0.2, 0.5});
  LayerOptions lo;
  lo.window = 32;
  auto a = SingleLayer(plane, Density::one(), lo).evaluate(X, 2);
  lo.window = 64;
  auto b = SingleLayer(plane, Density::one(), lo).evaluate(X, 2);
  CHECK(a.hessian.norm() < 1.0 / 32);
  CHECK(a.hessian.norm() / b.hessian.norm() == doctest::Approx(2.0).epsilon(0.05));
  CHECK(a.gradient(2) == doctest::Approx(-0.5).epsilon(0.05));
}

TEST_CASE("Calderon-Zygmund kernel") {
  CZKernel K{3};
  CHECK(K.phi(1.0) == 0.0);
  CHECK(K.phi(2.0) == 1.0);
  CHECK(K.phi(1.5) == doctest::Approx(0.5));
  double prev = 0;
  for (double t = 1.0; t <= 2.0; t += 0.01) {
    CHECK(K.phi(t) >= prev - 1e-15);
    prev = K.phi(t);
  }
  // C^1 and C^2 at the junctions: one-sided differences vanish.
  const double h = 1e-4;
  CHECK(K.phi(1 + h) < 1e-10);
  CHECK(1 - K.phi(2 - h) < 1e-10);
  CZKernel B{3, CZKernel::Cutoff::Bump};
  CHECK(B.phi(1 + 0.05) < 1e-8);
  CHECK(B.phi(1.5) == doctest::Approx(0.5));

  auto kb = kernel_bounds(K, {0.01, 1.0, 100.0});
  CHECK(kb.odd);
  CHECK(kb.c0 == doctest::Approx(1.0));
  CHECK(kb.c1 == doctest::Approx(std::sqrt(2.0 + 4.0)).epsilon(1e-6));  // eigenvalues 1, 1, -2
  CHECK(kb.c2 > 0);
  CHECK(kb.c2 < 100);
  Point x = make_point({0.3, 0.4, 0.0});
  CHECK((K.eval(x, 0.2) - K.eval(x)).norm() == 0.0);
  CHECK(K.eval(x, 1.0).norm() == 0.0);
}

TEST_CASE("Carleson functional on the plane decays with the window") {
  HyperplaneBoundary plane(3);
  CarlesonOptions opt;
  opt.sub = 0;
  auto a = carleson_ur_functional(plane, Ball{zeros(3), 1.0}, opt);
  auto b = carleson_ur_functional(plane, Ball{zeros(3), 1.0}, opt.refined());
  CHECK(a.ratio < 1e-3);
  CHECK(a.ratio > 0);
  CHECK(b.ratio * 4 <= a.ratio * 1.05);
  CHECK(b.window == 2 * a.window);
  CHECK(a.cells > 1000);
  CHECK_THROWS_AS(carleson_ur_functional(plane, Ball{make_point({0, 0, 0.5}), 1.0}, opt), DomainError);
}

TEST_CASE("Carleson functional on the sphere is stable") {
  SphereBoundary sph(3, zeros(3), 1.0);
  CarlesonOptions opt;
  opt.sub = 0;
  opt.k_collar = 5;
  opt.layer.sphere_panels = 12;
  Ball B{make_point({0, 0, 1}), 0.5};
  auto a = carleson_ur_functional(sph, B, opt);
  auto b = carleson_ur_functional(sph, B, opt.refined());
  CHECK(a.ratio > 0);
  CHECK(b.richardson == doctest::Approx(a.richardson).epsilon(0.1));
}

TEST_CASE("Carleson functional grows along the Cantor construction") {
  CarlesonOptions opt;
  opt.sub = 0;
  double prev = 0;
  for (int m = 1; m <= 3; ++m) {
    CantorBoundary E(m);
    Point x = E.left_ends()[0];
    opt.k_collar = 2 * m + 6;  // resolves the segments
    auto r = carleson_ur_functional(E, Ball{x, 0.5}, opt);
    CHECK(r.ratio > prev);
    prev = r.ratio;
  }
}

TEST_CASE("global square function identity on a patch") {
  HyperplaneBoundary patch(3, make_point({-0.5, -0.5}), make_point({0.5, 0.5}));
  CarlesonOptions opt;
  opt.sub = 0;
  opt.k_collar = 7;
  auto r = global_l2_check(patch, Density::one(), Box::around(zeros(3), 2.0), opt);
  CHECK(r.rhs == doctest::Approx(1.0));
  CHECK(r.ratio > 0.05);
  CHECK(r.ratio < 10);
  CHECK(r.cone_ratio > 0.1);
}

TEST_CASE("truncated singular integrals") {
  HyperplaneBoundary patch(3, make_point({-1, -1}), make_point({1, 1}));
  CZKernel K{3};
  SioOptions so;
  so.h = 0.05;
  auto F = truncated_sio(patch, K, Density::one(), 0.2, so);
  double centre = kInf, normal = 0;
  for (std::size_t i = 0; i < F.cloud.size(); ++i) {
    normal = std::max(normal, std::abs(F.values[i](2)));
    if (F.cloud.points[i].head(2).norm() < 0.04) centre = std::min(centre, F.values[i].norm());
  }
  CHECK(normal == 0.0);
  CHECK(centre < 0.1);
  CHECK_THROWS_AS(truncated_sio(patch, K, Density::one(), 0.1, so), ArgumentError);

  // Depth m of the Cantor construction: the sup over eps keeps growing.
  CZKernel K2{2};
  double prev = 0;
  for (int m = 1; m <= 4; ++m) {
    CantorBoundary c(m);
    SioOptions sc;
    sc.h = c.segment_length() / 8;
    std::vector<double> eps;
    for (int j = 1; j <= m; ++j) eps.push_back(0.5 * std::pow(4.0, -j) + 3 * sc.h);
    auto r = sio_sup_check(c, K2, Density::one(), eps, sc);
    CHECK(r.rows.size() == static_cast<std::size_t>(m));
    CHECK(r.sup > prev + 0.3);
    prev = r.sup;
  }
}

TEST_CASE("non-tangential regions") {
  auto E = std::make_shared<HyperplaneBoundary>(3);
  WhitneyDecomposition W(E, Box{make_point({-4, -4, 0}), make_point({4, 4, 8})}, Side::Interior);
  const Point x = make_point({0.1, 0.2, 0});
  auto cubes = nontangential_cubes(W, x, 24.0, 5);
  std::set<int> gens;
  for (const auto& I : cubes) {
    CHECK(I.box().distance(x) < 24.0 * I.side());
    gens.insert(I.k);
  }
  CHECK(gens.size() >= 4);
  CHECK(nontangential_cubes(W, x, 2.0, 5).empty());
  CHECK(nt_max([](const Point&) { return -3.0; }, W, x, 24.0, 5) == 3.0);
  // The layer potential of a patch is maximal over the region near its top.
  auto f = [](const Point& X) { return 1.0 / X.norm(); };
  double m = nt_max(f, W, x, 24.0, 5);
  CHECK(m > 0);
  CHECK(m < 1.0 / (10.0 * std::ldexp(1.0, -5)));
}
