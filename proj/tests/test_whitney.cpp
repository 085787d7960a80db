#include <doctest.h>

#include "rectilab/rng.hpp"
#include "rectilab/whitney.hpp"

#include <set>

using namespace rectilab;

namespace {
Box slab() { return {make_point({-1, -1, 0}), make_point({1, 1, 2})}; }
}  // namespace

TEST_CASE("half-space Whitney cubes match a brute-force selection") {
  auto plane = std::make_shared<HyperplaneBoundary>(3, 4.0);
  WhitneyDecomposition W(plane, slab(), Side::Interior);
  const double c = 6.0 * std::sqrt(3.0);
  // Oracle: enumerate every dyadic cube of generations 0..5 in a column and
  // keep those far enough away whose parent is not.
  Box col{make_point({0, 0, 0}), make_point({0.25, 0.25, 2})};
  std::set<WhitneyCube> brute;
  for (int k = 0; k <= 5; ++k) {
    double s = std::ldexp(1.0, -k);
    for (long long i = 0; i * s < 0.25; ++i)
      for (long long j = 0; j * s < 0.25; ++j)
        for (long long m = 0; m * s < 2; ++m) {
          double t0 = m * s;
          bool ok = t0 >= c * s;
          bool parent_ok = k > -1 && std::floor(t0 / (2 * s)) * 2 * s >= c * 2 * s;
          if (k == 0) parent_ok = false;
          if (ok && !parent_ok) brute.insert(dyadic_cube_at(make_point({(i + .5) * s, (j + .5) * s, t0 + .5 * s}), k));
        }
  }
  std::set<WhitneyCube> got;
  for (auto& I : W.cubes(col.inflate(-1e-9), 5)) got.insert(I);
  CHECK(got == brute);
  for (const auto& I : got) {
    double t0 = I.box().lo(2) / I.side();
    CHECK(t0 >= 11);
    CHECK(t0 <= 21);
  }
}

TEST_CASE("Whitney distance conditions and neighbors") {
  auto plane = std::make_shared<HyperplaneBoundary>(3, 4.0);
  WhitneyDecomposition W(plane, slab(), Side::Interior);
  auto rep = verify_whitney(W, slab(), 6);
  CHECK(rep.cubes > 100);
  CHECK(rep.pass());
  CHECK(rep.max_neighbor_ratio <= 4.0);
  CHECK(rep.min_ratio >= 6.0);
  CHECK(rep.max_ratio <= 14.0);

  auto sphere = builtin_boundary("sphere");
  Box big = Box::around(zeros(3), 128);
  WhitneyDecomposition X(sphere, big, Side::Exterior);
  auto cubes = X.cubes(big, 0);
  std::size_t far = 0;
  for (const auto& I : cubes) {
    auto c = whitney_check(*sphere, I);
    if (c.dist > 80) {
      ++far;
      CHECK(I.side() >= 1.0);
      CHECK(c.pass);
    }
    CHECK(I.exterior);
  }
  CHECK(far > 0);
  auto inner = verify_whitney(WhitneyDecomposition(sphere, Box::around(zeros(3), 1), Side::Interior), Box::around(zeros(3), 1), 5);
  CHECK(inner.pass());
}

TEST_CASE("lazy lookup covers the domain") {
  auto plane = std::make_shared<HyperplaneBoundary>(3, 4.0);
  WhitneyDecomposition W(plane, slab(), Side::Both);
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    Point x = make_point({rng.uniform(-1, 1), rng.uniform(-1, 1), std::exp(rng.uniform(-12, 0.5))});
    auto I = W.containing(x);
    REQUIRE(I);
    CHECK(I->box().contains(x));
    CHECK(W.accepted(*I));
  }
  CHECK_FALSE(W.containing(make_point({0.1, 0.2, 0.0})));
  CHECK_FALSE(W.containing(make_point({5, 0, 1})));
  WhitneyDecomposition Wi(plane, slab(), Side::Interior);
  CHECK_FALSE(Wi.containing(make_point({0.1, 0.1, -0.5})));
}

TEST_CASE("fattened cubes") {
  auto plane = std::make_shared<HyperplaneBoundary>(3, 4.0);
  WhitneyDecomposition W(plane, slab(), Side::Interior);
  auto cubes = W.cubes(slab(), 6);
  auto r = pairwise_fattening_check(*plane, cubes, 0.05);
  CHECK(r.pass);
  CHECK(r.touching > 0);
  CHECK(r.tau > 0.5);
  CHECK(r.tau <= 0.95 + 1e-12);
  CHECK(pairwise_fattening_check(*plane, cubes, 0.1).pass);
  CHECK_THROWS_AS(pairwise_fattening_check(*plane, cubes, 0.2), ArgumentError);
  CHECK_THROWS_AS(pairwise_fattening_check(*plane, cubes, 0.0), ArgumentError);

  WhitneyCube I = dyadic_cube_at(make_point({0.5, 0.5, 0.5}), 0);
  Box f = fatten(I, 0.1);
  CHECK(f.extent()(0) == doctest::Approx(1.1));
  CHECK(f.center() == I.center());
}

TEST_CASE("W_Q on the half-space") {
  auto plane = std::make_shared<HyperplaneBoundary>(3, 4.0);
  auto g = build_grid(plane, 0, 3);
  WhitneyDecomposition W(plane, {make_point({-4, -4, 0}), make_point({4, 4, 8})}, Side::Interior);
  auto Q = *g->ref_at(make_point({0.1, 0.1, 0}), 3);
  auto w = w_q(*g, W, Q);
  CHECK(!w.empty());
  double c0 = 8 * std::sqrt(3.0);
  bool above = false;
  for (const auto& I : w) {
    CHECK(I.k >= Q.k - 2);
    CHECK(I.k <= Q.k + 1);
    CHECK(Q.region.distance(I.box()) <= c0 * Q.side());
    if (I.box().contains(Q.center + make_point({0, 0, 11.5 * Q.side()}))) above = true;
  }
  CHECK(above);
  WqOptions paper;
  paper.paper_constants = true;
  CHECK(paper.resolve_c0(3) == doctest::Approx(1000 * std::sqrt(2.0)));
  WhitneyDecomposition tiny(plane, Box::around(make_point({3, 3, 7.9}), 0.05), Side::Interior);
  CHECK_THROWS_AS(w_q(*g, tiny, Q), ConfigError);
}
