#include <doctest.h>

#include "rectilab/rng.hpp"
#include "rectilab/sawtooth.hpp"

#include <map>
#include <set>

using namespace rectilab;

namespace {

struct Setup {
  std::shared_ptr<HyperplaneBoundary> E;
  GridPtr g;
  WhitneyPtr W;
};

Setup plane_setup(double half = 1.0, double win = 4.0, double height = 32.0) {
  Setup s;
  s.E = std::make_shared<HyperplaneBoundary>(3, half);
  s.g = build_grid(s.E, 0, 4);
  s.W = std::make_shared<WhitneyDecomposition>(s.E, Box{make_point({-win, -win, 0}), make_point({win, win, height})},
                                               Side::Interior);
  return s;
}

void descendants(const DyadicGrid& g, const CubeRef& Q, int k, std::vector<CubeRef>& out) {
  if (Q.k == k) {
    out.push_back(Q);
    return;
  }
  for (const auto& c : g.children(Q)) descendants(g, c, k, out);
}

}  // namespace

TEST_CASE("box unions and their boundary faces") {
  std::vector<Box> b{{make_point({0, 0}), make_point({2, 1})}, {make_point({1, 0}), make_point({3, 2})}};
  BoxUnion U(b);
  CHECK(U.contains(make_point({1.5, 0.5})));
  CHECK(U.contains(make_point({2.0, 0.5})));  // on an inner face
  CHECK_FALSE(U.contains(make_point({0.5, 1.0})));
  CHECK(U.contains_closed(make_point({0.5, 1.0})));
  CHECK_FALSE(U.contains(make_point({0.5, 1.5})));

  // Perimeter of the L-shaped union: 3 + 1 + 1 + 2 + 2 + 1 ... computed directly.
  auto faces = union_boundary_faces(b);
  double len = 0;
  for (const auto& f : faces) len += f.extent().maxCoeff();
  CHECK(len == doctest::Approx(10.0));

  // Two overlapping cubes sharing a bottom plane: the floor is counted once.
  std::vector<Box> c{{make_point({0, 0, 0}), make_point({1, 1, 1})}, {make_point({0.5, 0, 0}), make_point({1.5, 1, 1})}};
  double area = 0;
  for (const auto& f : union_boundary_faces(c)) {
    Point e = f.extent();
    area += std::max({e(0) * e(1), e(0) * e(2), e(1) * e(2)});
  }
  CHECK(area == doctest::Approx(2 * 1.5 + 2 * 1.5 + 2 * 1.0));
}

TEST_CASE("Carleson box matches a brute-force union") {
  auto s = plane_setup();
  RegionOptions opt;
  auto Q = *s.g->ref_at(make_point({0.3, 0.3, 0}), 3);
  auto T = carleson_box(s.g, s.W, Q, opt);
  // Oracle: every Whitney cube up to generation K tested against every
  // descendant of Q with in_w_q.
  const int K = 5;
  std::map<int, std::vector<CubeRef>> desc;
  for (int k = Q.k; k <= K + opt.wq.m0; ++k) descendants(*s.g, Q, k, desc[k]);
  std::vector<Box> fat;
  for (const auto& I : s.W->cubes(Q.region.inflate(2.5), K)) {
    bool in = false;
    for (int k = std::max(Q.k, I.k - 1); k <= I.k + opt.wq.m0 && !in; ++k)
      for (const auto& P : desc[k])
        if (in_w_q(*s.g, I, P, opt.wq)) {
          in = true;
          break;
        }
    if (in) fat.push_back(fatten(I, opt.lambda));
  }
  REQUIRE(fat.size() > 10);
  BoxUnion brute(fat);
  Rng rng(7);
  int inside = 0;
  const Point c = Q.center;
  for (int i = 0; i < 3000; ++i) {
    Point X = make_point({c(0) + rng.uniform(-1.5, 1.5), c(1) + rng.uniform(-1.5, 1.5), rng.uniform(0.7, 6)});
    bool b = brute.contains(X);
    inside += b;
    CHECK(T.contains(X) == b);
  }
  CHECK(inside > 100);
  CHECK(T.contains(cube_corkscrew(*s.g, *s.W, Q, opt.wq).X));
  for (const auto& I : T.members(K)) CHECK(brute.contains(I.center()));
}

TEST_CASE("ball boxes contain the enlarged ball and sit in a bounded ball") {
  auto s = plane_setup(4.0, 16.0, 64.0);
  const double r = 0.004;
  auto bb = ball_box_cubes(*s.g, zeros(3), r);
  CHECK(bb.k == 0);
  CHECK(std::ldexp(1.0, -bb.k - 1) < 200 * r);
  CHECK(200 * r <= std::ldexp(1.0, -bb.k));
  CHECK(bb.cubes.size() == 4);  // the origin is a shared corner
  auto T = carleson_box_ball(s.g, s.W, zeros(3), r);
  auto in = ball_inside(T, Ball{zeros(3), 1.25 * r}, 4000, 3);
  CHECK(in.hits > 1000);
  CHECK(in.counterexamples == 0);
  auto out = inside_ball(T, zeros(3), r, bb.k + 2, 4000, 5);
  CHECK(out.kappa > 1.25);
  CHECK(out.kappa < 1e4);
  CHECK(out.counterexamples == 0);
  CHECK_THROWS_AS(ball_box_cubes(*s.g, zeros(3), 10.0), ConfigError);
}

TEST_CASE("global and local sawtooth domains") {
  auto s = plane_setup();
  RegionOptions opt;
  auto all = sawtooth(s.g, s.W, {}, std::nullopt, opt);
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    Point X = make_point({rng.uniform(-1, 1), rng.uniform(-1, 1), std::exp(rng.uniform(-6, 2))});
    CHECK(all.contains(X));
  }
  CHECK_FALSE(all.contains(make_point({0, 0, -0.5})));

  auto Q = *s.g->ref_at(make_point({0.3, 0.3, 0}), 1);
  auto T = carleson_box(s.g, s.W, Q, opt);
  auto kids = s.g->children(Q);
  std::vector<CubeRef> grand;
  descendants(*s.g, Q, 3, grand);
  // Only Q itself survives: the leaf of T_Q.
  auto leaf = sawtooth(s.g, s.W, kids, Q, opt);
  auto mid = sawtooth(s.g, s.W, grand, Q, opt);
  CHECK(leaf.member(Q));
  CHECK_FALSE(leaf.member(kids[0]));
  CHECK(mid.member(kids[0]));
  std::size_t leaf_hits = 0, mid_hits = 0;
  for (int i = 0; i < 3000; ++i) {
    Point X = make_point({rng.uniform(-1, 2), rng.uniform(-1, 2), std::exp(rng.uniform(-3, 3))});
    bool a = leaf.contains(X), b = mid.contains(X), c = T.contains(X);
    leaf_hits += a;
    mid_hits += b;
    if (a) CHECK(b);
    if (b) CHECK(c);
  }
  CHECK(leaf_hits > 50);
  CHECK(mid_hits > leaf_hits);
  CHECK_THROWS_AS(sawtooth(s.g, s.W, {Q, kids[0]}, std::nullopt, opt), ArgumentError);
}

TEST_CASE("approximating domains are polyhedral with a uniform floor") {
  auto s = plane_setup(1.0, 0.75, 16.0);
  RegionOptions opt;
  for (int N = 4; N <= 6; ++N) {
    auto EN = approx_boundary(s.g, s.W, N, opt);
    double floor = kInf;
    for (const auto& f : EN->faces()) floor = std::min(floor, f.lo(2));
    const double h = std::ldexp(1.0, -N);
    CHECK(floor == doctest::Approx(10.975 * h));
    Point x = make_point({0.1, 0.1, floor});
    CHECK(EN->project(x).distance == doctest::Approx(0).scale(1));
    for (double m : {1.0, 4.0, 16.0}) {
      double ratio = EN->measure_in_ball(x, m * h) / (kPi * m * m * h * h);
      CHECK(ratio >= 0.9);
      CHECK(ratio <= 2.0);
    }
    CHECK(EN->in_domain(make_point({0.1, 0.1, floor + 0.5 * h})));
    CHECK_FALSE(EN->in_domain(make_point({0.1, 0.1, floor - 0.5 * h})));
    auto ext = corkscrew(*EN, x, 2 * h, Side::Exterior);
    CHECK(ext.c >= 0.25);
    auto in = corkscrew(*EN, x, 2 * h, Side::Interior);
    CHECK(in.c >= 0.25);
  }
}

TEST_CASE("Whitney regions on the half-space") {
  auto s = plane_setup(1.0, 4.0, 32.0);
  auto Q1 = *s.g->ref_at(make_point({0.1, 0.1, 0}), 2);
  auto Q2 = *s.g->ref_at(make_point({0.4, 0.1, 0}), 2);
  REQUIRE_FALSE(Q1 == Q2);
  auto w1 = w_q(*s.g, *s.W, Q1), w2 = w_q(*s.g, *s.W, Q2);
  std::set<WhitneyCube> a(w1.begin(), w1.end());
  std::size_t shared = 0;
  for (const auto& I : w2) shared += a.count(I);
  CHECK(shared > 0);

  auto R = whitney_region(*s.g, *s.W, Q1);
  CHECK(R.contains_xq);
  CHECK(R.contains_children);
  CHECK(R.chains_inside);
  CHECK(R.fallback_chains == 0);
  CHECK(R.k_star <= 2);
  CHECK(R.w_star.size() >= R.w.size());
  CHECK(R.K0 < 1.5 * 8 * std::sqrt(3.0));
  for (const auto& I : R.w) CHECK(R.in_u(I.center()));
  CHECK(R.in_u_star(R.X_Q));
  CHECK(R.metadata()["w"] == R.w.size());
}
