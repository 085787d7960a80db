#include <doctest.h>

#include "rectilab/boundary.hpp"
#include "rectilab/rng.hpp"

using namespace rectilab;

TEST_CASE("plane surface ball measure") {
  HyperplaneBoundary plane(3);
  CHECK(sigma_of_ball(plane, {zeros(3), 1.0}) == doctest::Approx(kPi).epsilon(1e-14));
  CHECK(sigma_of_ball(plane, {zeros(3), 0.0}) == 0.0);
  CHECK(sigma_of_ball(plane, {zeros(3), 1e-9}) == doctest::Approx(kPi * 1e-18));
  CHECK_THROWS_AS(sigma_of_ball(plane, {make_point({0, 0, 0.1}), 1.0}), DomainError);
}

TEST_CASE("sphere cap measure") {
  SphereBoundary s(3, zeros(3), 1.0);
  Point north = make_point({0, 0, 1});
  CHECK(sigma_of_ball(s, {north, 2.0}) == doctest::Approx(4 * kPi));
  // Cap of chordal radius r has area pi r^2 on the unit sphere.
  for (double r : {0.1, 0.5, 1.3})
    CHECK(sigma_of_ball(s, {north, r}) == doctest::Approx(kPi * r * r).epsilon(1e-12));
  SphereBoundary c(2, zeros(2), 1.0);
  CHECK(sigma_of_ball(c, {make_point({1, 0}), 2.0}) == doctest::Approx(2 * kPi));
  CHECK(sigma_of_ball(c, {make_point({1, 0}), std::sqrt(2.0)}) == doctest::Approx(kPi));
}

TEST_CASE("disk rectangle area against grid count") {
  // Independent oracle: midpoint counting on a fine grid.
  auto count = [](double cx, double cy, double R, double x1, double x2, double y1, double y2) {
    const int M = 2000;
    double dx = (x2 - x1) / M, dy = (y2 - y1) / M, a = 0;
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j) {
        double x = x1 + (i + 0.5) * dx - cx, y = y1 + (j + 0.5) * dy - cy;
        if (x * x + y * y < R * R) a += dx * dy;
      }
    return a;
  };
  CHECK(disk_rectangle_area(0, 0, 1, -2, 2, -2, 2) == doctest::Approx(kPi));
  CHECK(disk_rectangle_area(0.3, 0.2, 0.7, 0, 1, 0, 1) ==
        doctest::Approx(count(0.3, 0.2, 0.7, 0, 1, 0, 1)).epsilon(2e-4));
  CHECK(disk_rectangle_area(-0.1, 0.9, 0.5, 0, 1, 0, 1) ==
        doctest::Approx(count(-0.1, 0.9, 0.5, 0, 1, 0, 1)).epsilon(2e-4));
  CHECK(disk_rectangle_area(0.5, 0.5, 2.0, 0, 1, 0, 1) == doctest::Approx(1.0));
  CHECK(disk_rectangle_area(5, 5, 1.0, 0, 1, 0, 1) == 0.0);
}

TEST_CASE("distance to boundary") {
  HyperplaneBoundary plane(3);
  auto p = distance_to_boundary(plane, make_point({0, 0, 1}));
  CHECK(p.distance == 1.0);
  CHECK(p.foot.norm() == 0.0);
  SphereBoundary s(3, zeros(3), 1.0);
  auto q = distance_to_boundary(s, zeros(3));
  CHECK(q.distance == 1.0);
  CHECK(q.foot.norm() == doctest::Approx(1.0));

  HyperplaneBoundary patch(3, make_point({-1, -1}), make_point({1, 1}));
  double h = 0.05;
  PointCloudBoundary cloud(sample_boundary(patch, h, 1));
  auto c = distance_to_boundary(cloud, make_point({0, 0, 1}));
  CHECK(std::abs(c.distance - 1.0) <= h);
}

TEST_CASE("distance is 1-Lipschitz") {
  std::vector<BoundaryPtr> models = {builtin_boundary("plane"), builtin_boundary("sphere"),
                                     builtin_boundary("lipschitz-tent"), builtin_boundary("halfspace-slit")};
  Rng rng(7);
  for (const auto& E : models) {
    for (int i = 0; i < 200; ++i) {
      Point x = rng.in_ball(3) * 1.5, y = rng.in_ball(3) * 1.5;
      double dx = E->project(x).distance, dy = E->project(y).distance;
      CHECK(std::abs(dx - dy) <= (x - y).norm() + 1e-9);
    }
  }
}

TEST_CASE("adr check") {
  HyperplaneBoundary plane(3);
  auto rep = adr_check(plane, {zeros(3), make_point({1, 2, 0})}, {0.1, 1.0, 3.0});
  CHECK(rep.constant == doctest::Approx(kPi));
  CHECK(rep.worst_lower == doctest::Approx(kPi));

  SphereBoundary s(3, zeros(3), 1.0);
  auto rs = adr_check(s, {make_point({0, 0, 1}), make_point({1, 0, 0})}, {0.05, 0.5, 1.0, 1.5, 2.0});
  CHECK(rs.constant <= 4.0);
  CHECK(rs.worst_upper == doctest::Approx(kPi));
  CHECK_THROWS_AS(adr_check(s, {}, {1.0}), ArgumentError);
  CHECK_THROWS_AS(adr_check(s, {zeros(3)}, {}), ArgumentError);

  // Cantor set with its natural length measure stays ADR (dimension 1).
  CantorBoundary k(4);
  std::vector<Point> centers;
  for (std::size_t i = 0; i < k.left_ends().size(); i += 37) centers.push_back(k.left_ends()[i]);
  auto rk = adr_check(k, centers, {1.0 / 64, 1.0 / 16, 0.25, 1.0});
  CHECK(rk.constant < 10.0);
}

TEST_CASE("boundary sampling") {
  SphereBoundary s(3, zeros(3), 1.0);
  auto c = sample_boundary(s, 0.1, 3);
  CHECK(c.size() == doctest::Approx(4 * kPi / 0.01).epsilon(0.01));
  CHECK(c.total_weight() == doctest::Approx(4 * kPi).epsilon(0.02));
  auto c2 = sample_boundary(s, 0.1, 3);
  CHECK(c2.points[17] == c.points[17]);

  HyperplaneBoundary patch(3, make_point({0, 0}), make_point({1, 1}));
  auto g = sample_boundary(patch, 0.25, 0);
  CHECK(g.size() == 16);
  for (double w : g.weights) CHECK(w == doctest::Approx(1.0 / 16));
  CHECK(g.total_weight() == doctest::Approx(1.0));

  GraphBoundary tent(3, GraphBoundary::Profile::Tent, 0.5, 1.0, 1.0);
  // Two tilted half-patches, each of area 2 * sqrt(1 + 1/4).
  double area = 4.0 * std::sqrt(1.25);
  CHECK(tent.window_area() == doctest::Approx(area));
  CHECK(sample_boundary(tent, 0.05, 0).total_weight() == doctest::Approx(area).epsilon(1e-3));
  CHECK_THROWS_AS(sample_boundary(s, 5.0, 0), ArgumentError);
}

TEST_CASE("point cloud reproduces analytic measure") {
  SphereBoundary s(3, zeros(3), 1.0);
  double h = 0.02;
  auto sp = std::make_shared<SphereBoundary>(s);
  PointCloudBoundary cloud(sample_boundary(s, h, 11), sp);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Point x = rng.on_sphere(3);
    double r = rng.uniform(10 * h, 1.0);
    double exact = s.measure_in_ball(x, r);
    CHECK(std::abs(cloud.measure_in_ball(x, r) - exact) <= 3.0 * h / r * exact);
  }
}

TEST_CASE("graph and polyhedral measures") {
  GraphBoundary tent(3, GraphBoundary::Profile::Tent, 0.5, 1.0, 2.0);
  Point x = make_point({0.5, 0.0, 0.25});
  // Away from the kink the graph is a tilted plane: the ball cuts a flat disk.
  CHECK(tent.measure_in_ball(x, 0.3) == doctest::Approx(kPi * 0.09).epsilon(1e-4));
  CHECK(tent.project(make_point({0.5, 0.0, 1.25})).distance == doctest::Approx(1.0 / std::sqrt(1.25)).epsilon(1e-9));

  auto slit = builtin_boundary("halfspace-slit");
  CHECK(slit->in_domain(make_point({0.5, 0, 0.5})));
  CHECK_FALSE(slit->in_domain(make_point({0.5, 0, -0.5})));
  // Ball around a wall point meets the wall on both sides: one disk.
  CHECK(slit->measure_in_ball(make_point({0, 0, 0.5}), 0.2) == doctest::Approx(kPi * 0.04));

  std::vector<Box> cube;
  for (int a = 0; a < 3; ++a)
    for (double v : {0.0, 1.0}) {
      Point lo = zeros(3), hi = Point::Ones(3);
      lo(a) = hi(a) = v;
      cube.push_back({lo, hi});
    }
  PolyhedralBoundary P(3, cube);
  CHECK(P.total_area() == 6.0);
  CHECK(P.in_domain(make_point({0.5, 0.5, 0.5})));
  CHECK_FALSE(P.in_domain(make_point({1.5, 0.5, 0.5})));
  CHECK(P.project(make_point({0.5, 0.5, 0.6})).distance == doctest::Approx(0.4));
}

TEST_CASE("serialization round trip") {
  for (const char* name : {"plane", "plane-patch", "sphere", "lipschitz-sine", "cantor-3", "halfspace-slit"}) {
    auto E = builtin_boundary(name);
    auto F = boundary_from_json(E->to_json());
    CHECK(F->variant() == E->variant());
    CHECK(F->to_json() == E->to_json());
  }
  CHECK_THROWS_AS(boundary_from_json(nlohmann::json{{"variant", "torus"}}), ConfigError);
}
