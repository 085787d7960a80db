#include <doctest.h>

#include "rectilab/dyadic.hpp"

using namespace rectilab;

namespace {
BoundaryPtr unit_patch() {
  return std::make_shared<HyperplaneBoundary>(3, make_point({0, 0}), make_point({1, 1}));
}
}  // namespace

TEST_CASE("flat patch grid is the Euclidean dyadic squares") {
  auto g = build_grid(unit_patch(), 0, 4);
  for (int k = 0; k <= 4; ++k) CHECK(g->level(k).size() == std::size_t(1) << (2 * k));
  auto rep = verify_grid(*g);
  CHECK(rep.violations() == 0);
  CHECK(rep.c1 == doctest::Approx(std::sqrt(2.0)));
  CHECK(rep.a0 == doctest::Approx(0.5));
  for (const auto& q : g->cubes()) {
    double s = q.side();
    // Corner on the 2^-k lattice, side exactly 2^-k.
    CHECK(q.region.lo(0) / s == std::floor(q.region.lo(0) / s));
    CHECK(q.region.hi(1) - q.region.lo(1) == s);
    CHECK(q.sigma == s * s);
  }
  auto cb = cube_ball(*g, g->level(2)[5]);
  CHECK(cb.ball.radius == 0.125);
  CHECK(cb.containment == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("discretized Carleson regions and sawtooths") {
  auto g = build_grid(unit_patch(), 0, 3);
  int root = g->level(0)[0];
  CHECK(discretized_carleson(*g, root).size() == 1 + 4 + 16 + 64);
  int leaf = g->level(3)[7];
  CHECK(discretized_carleson(*g, leaf) == std::vector<int>{leaf});
  CHECK_THROWS_AS(discretized_carleson(*g, 100000), ArgumentError);

  CHECK(discretized_sawtooth(*g, {}).size() == g->size());
  CHECK(discretized_sawtooth(*g, {}, root).size() == g->size());
  CHECK(discretized_sawtooth(*g, {root}, root).empty());
  // F = all cubes of generation N keeps exactly the coarser generations.
  auto kept = discretized_sawtooth(*g, g->level(2));
  CHECK(kept.size() == 1 + 4);
  for (int id : kept) CHECK(g->cube(id).k < 2);
  int child = g->cube(root).children[0];
  CHECK_THROWS_AS(discretized_sawtooth(*g, {root, child}), ArgumentError);
}

TEST_CASE("thin boundary band on the plane") {
  auto plane = std::make_shared<HyperplaneBoundary>(3, 2.0);
  auto g = build_grid(plane, 0, 2);
  int q = g->locate(make_point({0.5, 0.5, 0}), 0);
  REQUIRE(q >= 0);
  CHECK(thin_boundary_check(*g, q, 0.1) == doctest::Approx(1 - 0.8 * 0.8));
  for (double tau : {0.05, 0.1, 0.2}) CHECK(thin_boundary_check(*g, q, tau) <= 4 * tau);
  CHECK(thin_boundary_check(*g, q, 1e-9) < 1e-8);
}

TEST_CASE("sphere grid properties") {
  auto s = builtin_boundary("sphere");
  GridOptions opt;
  opt.spacing_fraction = 0.25;
  auto g = build_grid(s, 0, 4, opt);
  auto rep = verify_grid(*g);
  CHECK(rep.violations() == 0);
  CHECK(rep.c1 <= 4.0);
  CHECK(rep.a0 > 0.0);
  CHECK(rep.partition_error < 1e-12);
  double total = 0;
  for (int id : g->level(0)) total += g->cube(id).sigma;
  CHECK(total == doctest::Approx(4 * kPi).epsilon(0.02));
  // Every descendant has a larger generation and the root as ancestor.
  for (int q : g->level(1))
    for (int c : discretized_carleson(*g, q)) {
      CHECK(g->cube(c).k >= 1);
      CHECK(g->is_ancestor(q, c));
    }
  for (int q : g->level(3)) {
    auto cb = cube_ball(*g, q);
    for (std::size_t i = g->cube(q).begin; i < g->cube(q).end; ++i)
      CHECK((g->samples().points[i] - cb.ball.center).norm() <= cb.containment * cb.ball.radius + 1e-12);
  }
}

TEST_CASE("point cloud of the plane reproduces the analytic tree") {
  auto patch = std::make_shared<HyperplaneBoundary>(3, make_point({0, 0}), make_point({1, 1}));
  auto cloud = std::make_shared<PointCloudBoundary>(sample_boundary(*patch, std::ldexp(1.0, -8), 0), patch);
  auto ga = build_grid(patch, 0, 6);
  auto gc = build_grid(cloud, 0, 6);
  REQUIRE(ga->size() == gc->size());
  for (int k = 0; k <= 6; ++k)
    for (std::size_t j = 0; j < ga->level(k).size(); ++j) {
      const auto& a = ga->cube(ga->level(k)[j]);
      int cid = gc->locate(a.center, k);
      REQUIRE(cid >= 0);
      const auto& c = gc->cube(cid);
      CHECK(a.center == c.center);
      CHECK(c.sigma == doctest::Approx(a.sigma));
      CHECK(a.region.contains(c.region));
    }
  CHECK(verify_grid(*gc).violations() == 0);
}

TEST_CASE("cantor grid and tau0 ball") {
  auto k = builtin_boundary("cantor-4");
  auto g = build_grid(k, 1, 6);
  CHECK(verify_grid(*g).violations() == 0);

  CHECK(tau0_formula(2.0, 2) == doctest::Approx(std::pow(8.0, -0.5)));
  auto gp = build_grid(unit_patch(), 0, 3);
  for (int q : gp->level(2)) {
    auto t = tau0_ball(*gp, q, kPi, std::sqrt(2.0));
    CHECK(t.pass);
    CHECK(t.sigma_ball >= 1.1 * t.lower_bound);
    CHECK(t.sigma_ball <= t.upper_bound / 1.1);
  }
}

TEST_CASE("grid errors") {
  CHECK_THROWS_AS(build_grid(unit_patch(), 3, 1), ArgumentError);
  auto plane = std::make_shared<HyperplaneBoundary>(3, 2.0);
  GridOptions opt;
  opt.window = Box{make_point({0.3, 0, 0}), make_point({1.3, 1, 0})};
  CHECK_THROWS_AS(build_grid(plane, 0, 2, opt), ArgumentError);
}

TEST_CASE("cube handles beyond the built generations") {
  auto plane = std::make_shared<HyperplaneBoundary>(3, 2.0);
  auto g = build_grid(plane, 0, 3);
  Point x = make_point({0.3, -0.7, 0});
  auto q = g->ref_at(x, 12);
  REQUIRE(q);
  CHECK(q->id == -1);
  CHECK(q->region.contains(x));
  CHECK(q->side() == std::ldexp(1.0, -12));
  auto a = g->ancestor(*q, 2);
  CHECK(a.id == g->locate(x, 2));
  CHECK(g->children(a).size() == 4);
  Box b = Box::around(make_point({0.5, 0.5, 0.0}), 0.0);
  auto near = g->cubes_near(b, 3, 0.0);
  CHECK(near.size() == 4);  // point is a shared corner
  for (const auto& c : near) CHECK(c.id >= 0);

  auto s = build_grid(builtin_boundary("sphere"), 0, 3);
  CHECK_FALSE(s->resolves(4));
  CHECK_FALSE(s->ref_at(make_point({0, 0, 1}), 4));
  auto qs = s->ref_at(make_point({0, 0, 1}), 3);
  REQUIRE(qs);
  CHECK(s->ancestor(*qs, 0).id == s->locate(make_point({0, 0, 1}), 0));
  auto ns = s->cubes_near(Box::around(make_point({0, 0, 1}), 0.0), 2, 0.05);
  CHECK(!ns.empty());
  for (const auto& c : ns) CHECK(s->distance(c, make_point({0, 0, 1})) <= 0.05);
}
