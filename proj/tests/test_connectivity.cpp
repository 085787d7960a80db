#include <doctest.h>

#include "rectilab/connectivity.hpp"
#include "rectilab/rng.hpp"

using namespace rectilab;

namespace {
// Half-space Poisson kernel with pole y on the plane.
double poisson(const Point& X, const Point& y) {
  Point z = X - y;
  return X(2) / (2 * kPi * std::pow(z.squaredNorm(), 1.5));
}
}  // namespace

TEST_CASE("corkscrew points") {
  auto plane = builtin_boundary("plane");
  for (double r : {0.01, 0.3, 2.0}) {
    auto c = corkscrew(*plane, zeros(3), r);
    CHECK(c.c == doctest::Approx(0.5).epsilon(1e-9));
    CHECK((c.X - make_point({0, 0, r / 2})).norm() <= 1e-9 * r);
    CHECK(c.certified);
  }
  auto ball = builtin_boundary("sphere");
  auto c = corkscrew(*ball, make_point({0, 0, 1}), 0.5);
  CHECK(c.c >= 0.25);
  CHECK(std::abs(c.X(0)) < 1e-6);
  CHECK(std::abs(c.X(1)) < 1e-6);
  CHECK(c.X(2) < 1.0);
  auto e = corkscrew(*ball, make_point({0, 0, 1}), 0.5, Side::Exterior);
  CHECK(e.X(2) > 1.0);
  CHECK_THROWS_AS(corkscrew(*ball, make_point({0, 0, 1}), 3.0), ArgumentError);
  CorkscrewOptions strict;
  strict.c_min = 0.6;
  CHECK_THROWS_AS(corkscrew(*plane, zeros(3), 1.0, Side::Interior, strict), SearchFailure);

  // Any interior point is a corkscrew point for the surface ball of radius 2 delta.
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    Point X = rng.in_ball(3) * 0.95;
    auto p = ball->project(X);
    CHECK(corkscrew_constant(*ball, X, p.foot, 2 * p.distance, Side::Interior) >= 0.5 - 1e-12);
  }
}

TEST_CASE("Harnack chains") {
  auto plane = builtin_boundary("plane");
  Point X = make_point({0, 0, 1}), Y = make_point({3, 0, 1});
  auto h = harnack_chain(*plane, X, Y, 1.0, 3.0);
  CHECK(h.size() <= 7);
  auto v = verify_chain(*plane, h);
  CHECK(v.pass());
  CHECK(v.ratio <= 2.0 + 1e-9);
  // Harnack bound against the analytic kernel.
  Point y = make_point({10, 4, 0});
  double lo = kInf, hi = 0;
  for (const auto& b : h.balls) {
    lo = std::min(lo, poisson(b.center, y));
    hi = std::max(hi, poisson(b.center, y));
  }
  CHECK(hi / lo <= std::pow(3.0, static_cast<double>(h.size())));

  auto one = harnack_chain(*plane, X, X, 1.0, 3.0);
  CHECK(one.size() == 1);
  CHECK(verify_chain(*plane, one).pass());
  CHECK_THROWS_AS(harnack_chain(*plane, X, Y, 1.0, 2.0), PreconditionError);
  CHECK_THROWS_AS(harnack_chain(*plane, X, Y, 2.0, 3.0), PreconditionError);

  auto ball = builtin_boundary("sphere");
  auto hb = harnack_chain(*ball, make_point({0.5, 0, 0}), make_point({-0.5, 0, 0}), 0.5, 2.0);
  CHECK(verify_chain(*ball, hb).pass());
}

TEST_CASE("slit control needs long chains") {
  auto slit = builtin_boundary("halfspace-slit");
  Point X = make_point({-0.1, 0, 0.2}), Y = make_point({0.1, 0, 0.2});
  auto h = harnack_chain(*slit, X, Y, 0.1, 2.0);
  CHECK(verify_chain(*slit, h).pass());
  auto plane = builtin_boundary("plane");
  auto hp = harnack_chain(*plane, X, Y, 0.1, 2.0);
  CHECK(h.size() > 3 * hp.size());
  bool over = false;
  for (const auto& b : h.balls) over = over || b.center(2) > 1.0;
  CHECK(over);
}

TEST_CASE("cube corkscrews") {
  auto plane = std::make_shared<HyperplaneBoundary>(3, 4.0);
  auto g = build_grid(plane, 0, 3);
  WhitneyDecomposition W(plane, {make_point({-4, -4, 0}), make_point({4, 4, 8})}, Side::Interior);
  for (int k = 1; k <= 3; ++k) {
    auto Q = *g->ref_at(make_point({0.3, 0.3, 0}), k);
    auto c = cube_corkscrew(*g, W, Q);
    CHECK(c.cube.k == k);
    CHECK(c.X(2) == doctest::Approx(11.5 * Q.side()));
    CHECK(c.delta_ratio >= 0.125);
    CHECK(c.delta_ratio <= 16);
  }
  auto s = builtin_boundary("sphere");
  auto gs = build_grid(s, 0, 3);
  WhitneyDecomposition Ws(s, Box::around(zeros(3), 1.0), Side::Interior);
  for (int k = 0; k <= 3; ++k)
    for (std::size_t j = 0; j < gs->level(k).size(); j += 7) {
      auto c = cube_corkscrew(*gs, Ws, gs->ref(gs->level(k)[j]));
      CHECK(c.delta_ratio >= 0.125);
      CHECK(c.delta_ratio <= 16);
      CHECK(c.dist_ratio >= 0.125);
      CHECK(c.dist_ratio <= 16);
    }
}

TEST_CASE("NTA diagnostics") {
  auto plane = builtin_boundary("plane");
  auto rep = nta_diagnostics(*plane, zeros(3), {0.05, 0.2, 1.0});
  for (const auto& r : rep.rows) {
    CHECK(r.c == doctest::Approx(0.5).epsilon(1e-6));
  }
  // Chain lengths are scale invariant on the plane.
  for (std::size_t j = 0; j < rep.rows[0].chain_lengths.size(); ++j)
    CHECK(std::abs(rep.rows[0].chain_lengths[j].second - rep.rows[2].chain_lengths[j].second) <= 1);

  auto slit = builtin_boundary("halfspace-slit");
  auto rs = nta_diagnostics(*slit, zeros(3), {0.4, 0.1}, {8});
  REQUIRE(rs.rows.size() == 2);
  CHECK(rs.rows[1].chain_lengths[0].second > rs.rows[0].chain_lengths[0].second);
  CHECK(rs.to_json()["rows"].size() == 2);
}
