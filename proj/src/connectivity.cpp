#include "rectilab/connectivity.hpp"

#include "rectilab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>

namespace rectilab {

namespace {

bool on_side(const BoundaryModel& E, const Point& X, Side side) {
  switch (side) {
    case Side::Interior:
      return E.in_domain(X);
    case Side::Exterior:
      return !E.in_domain(X);
    case Side::Both:
      return true;
  }
  return false;
}

double delta(const BoundaryModel& E, const Point& X) { return E.project(X).distance; }

}  // namespace

double corkscrew_constant(const BoundaryModel& E, const Point& X, const Point& x, double r, Side side) {
  if (!on_side(E, X, side)) return 0.0;
  double c = std::min(delta(E, X), r - (X - x).norm()) / r;
  return std::max(c, 0.0);
}

CorkscrewResult corkscrew(const BoundaryModel& E, const Point& x, double r, Side side,
                          const CorkscrewOptions& opt) {
  if (!(r > 0.0) || !(r < E.diameter())) throw ArgumentError("corkscrew radius must lie in (0, diam E)");
  const int d = E.ambient_dim();
  std::vector<Point> dirs;
  for (int i = 0; i < d; ++i)
    for (double s : {1.0, -1.0}) dirs.push_back(s * unit(d, i));
  Rng rng(derive_seed(opt.seed, 0, 0xc0c5));
  for (int i = 0; i < opt.directions; ++i) dirs.push_back(rng.on_sphere(d));
  for (int i = 0; i < opt.directions; ++i) {
    Point y = x + r * rng.in_ball(d);
    if (on_side(E, y, side) && (y - x).norm() > 1e-12 * r) dirs.push_back((y - x).normalized());
  }

  CorkscrewResult best;
  best.x = x;
  best.r = r;
  best.side = side;
  best.X = x;
  double best_delta = -1.0;
  auto consider = [&](const Point& X) {
    double c = corkscrew_constant(E, X, x, r, side);
    if (c <= 0) return;
    double dl = delta(E, X);
    bool better = c > best.c + 1e-12 ||
                  (c > best.c - 1e-12 && (dl > best_delta + 1e-12 || (dl > best_delta - 1e-12 && lex_less(X, best.X))));
    if (better) {
      best.c = c;
      best.X = X;
      best_delta = dl;
    }
  };
  const int M = 24;
  for (const Point& u : dirs) {
    auto f = [&](double t) { return corkscrew_constant(E, x + t * u, x, r, side); };
    int arg = -1;
    double fmax = 0;
    for (int j = 1; j < M; ++j) {
      double v = f(r * j / M);
      if (v > fmax) {
        fmax = v;
        arg = j;
      }
    }
    if (arg < 0) continue;
    // Golden-section refinement on the bracketing cells.
    double a = r * (arg - 1) / M, b = r * (arg + 1) / M;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = b - g * (b - a), c2 = a + g * (b - a), f1 = f(c1), f2 = f(c2);
    for (int it = 0; it < 60 && b - a > 1e-12 * r; ++it) {
      if (f1 < f2) {
        a = c1;
        c1 = c2;
        f1 = f2;
        c2 = a + g * (b - a);
        f2 = f(c2);
      } else {
        b = c2;
        c2 = c1;
        f2 = f1;
        c1 = b - g * (b - a);
        f1 = f(c1);
      }
    }
    consider(x + r * arg / M * u);
    consider(x + 0.5 * (a + b) * u);
  }
  if (best.c < opt.c_min)
    throw SearchFailure("no corkscrew point with c >= " + std::to_string(opt.c_min) + " at radius " +
                        std::to_string(r));
  best.certified = true;
  for (int i = 0; i < opt.certify_samples; ++i) {
    Point y = best.X + (1.0 - 1e-9) * best.c * r * rng.in_ball(d);
    if (!on_side(E, y, side) || (y - x).norm() >= r) best.certified = false;
  }
  return best;
}

namespace {

struct Node {
  WhitneyCube cube;
  double g = kInf;
  int from = -1;
  bool closed = false;
};

// Greedy shortcut of a polyline keeping segments at distance >= floor from E.
std::vector<Point> shortcut(const BoundaryModel& E, const std::vector<Point>& P, double floor, double step) {
  auto clear = [&](const Point& a, const Point& b) {
    int m = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step)));
    for (int i = 0; i <= m; ++i) {
      Point z = a + (b - a) * (static_cast<double>(i) / m);
      if (!E.in_domain(z) || delta(E, z) < floor) return false;
    }
    return true;
  };
  std::vector<Point> out{P.front()};
  std::size_t i = 0;
  while (i + 1 < P.size()) {
    std::size_t j = P.size() - 1;
    while (j > i + 1 && !clear(P[i], P[j])) --j;
    out.push_back(P[j]);
    i = j;
  }
  return out;
}

}  // namespace

HarnackChain harnack_chain(const BoundaryModel& E, const Point& X, const Point& Y, double rho, double Lambda,
                           const ChainOptions& opt) {
  if (!(rho > 0) || !(Lambda > 0)) throw ArgumentError("rho and Lambda must be positive");
  if (!E.in_domain(X) || !E.in_domain(Y)) throw PreconditionError("chain endpoints must lie in the domain");
  const double dX = delta(E, X), dY = delta(E, Y);
  if (dX < rho * (1 - 1e-12) || dY < rho * (1 - 1e-12))
    throw PreconditionError("chain endpoints closer than rho to the boundary");
  if ((X - Y).norm() > Lambda * rho * (1 + 1e-12)) throw PreconditionError("|X - Y| exceeds Lambda rho");

  HarnackChain h;
  h.X = X;
  h.Y = Y;
  if ((X - Y).norm() == 0.0) {
    h.balls.push_back({X, 0.5 * dX});
    h.ratio = 2.0;
    return h;
  }

  // Non-owning handle; the decomposition does not outlive this call.
  BoundaryPtr Ep(&E, [](const BoundaryModel*) {});
  Box span{X.cwiseMin(Y), X.cwiseMax(Y)};
  const double floor = 0.25 * rho;
  for (int attempt = 0; attempt <= opt.window_growth && h.route.empty(); ++attempt) {
    Box window = span.inflate(std::ldexp(Lambda * rho + 2.0 * rho, attempt));
    WhitneyOptions wo;
    wo.k_finest = static_cast<int>(std::ceil(std::log2(128.0 / rho)));
    wo.ratio = 1.0;
    WhitneyDecomposition W(Ep, window, Side::Interior, wo);
    auto start = W.containing(X), goal = W.containing(Y);
    if (!start || !goal) continue;

    std::vector<Node> nodes;
    std::unordered_map<WhitneyCube, int, WhitneyCubeHash> index;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    const Point target = goal->center();
    auto push = [&](const WhitneyCube& c, double g, int from) {
      auto [it, fresh] = index.try_emplace(c, static_cast<int>(nodes.size()));
      if (fresh) nodes.push_back({c});
      Node& n = nodes[it->second];
      if (n.closed || g >= n.g) return;
      n.g = g;
      n.from = from;
      open.push({g + (c.center() - target).norm() / c.side(), it->second});
    };
    push(*start, 0.0, -1);
    int found = -1;
    while (!open.empty()) {
      auto [f, id] = open.top();
      open.pop();
      if (nodes[id].closed) continue;
      nodes[id].closed = true;
      if (nodes[id].cube == *goal) {
        found = id;
        break;
      }
      if (nodes.size() > opt.max_nodes) break;
      const WhitneyCube cur = nodes[id].cube;
      const double g = nodes[id].g;
      for (const auto& J : W.face_neighbors(cur)) {
        if (E.distance_to_box(J.box()) < floor) continue;
        // Roughly one ball per hop: cost measured in units of the smaller cube.
        push(J, g + (J.center() - cur.center()).norm() / std::min(J.side(), cur.side()), id);
      }
    }
    if (found < 0) continue;
    for (int id = found; id >= 0; id = nodes[id].from) h.route.push_back(nodes[id].cube);
    std::reverse(h.route.begin(), h.route.end());
  }
  if (h.route.empty()) throw ConnectivityError("no Whitney path between the chain endpoints");

  std::vector<Point> poly{X};
  for (std::size_t i = 1; i + 1 < h.route.size(); ++i) poly.push_back(h.route[i].center());
  poly.push_back(Y);
  poly = shortcut(E, poly, 0.5 * rho, 0.125 * rho);

  // Balls of radius delta/2 centred along the path, one radius apart.
  std::size_t seg = 0;
  Point Z = X;
  while (true) {
    double r = 0.5 * delta(E, Z);
    double remaining = (poly[seg + 1] - Z).norm();
    for (std::size_t j = seg + 1; j + 1 < poly.size(); ++j) remaining += (poly[j + 1] - poly[j]).norm();
    h.balls.push_back({Z, r});
    if (remaining <= r * (1 + 1e-9)) break;
    double step = r;
    while (step > 0) {
      double left = (poly[seg + 1] - Z).norm();
      if (step < left) {
        Z += step * (poly[seg + 1] - Z) / left;
        step = 0;
      } else {
        step -= left;
        Z = poly[seg + 1];
        ++seg;
      }
    }
    if (h.balls.size() > 100000) throw ConnectivityError("chain does not terminate");
  }
  h.balls.push_back({Y, 0.5 * dY});
  h.ratio = 2.0;
  return h;
}

ChainCheck verify_chain(const BoundaryModel& E, const HarnackChain& h) {
  ChainCheck c;
  if (h.balls.empty()) return c;
  c.endpoints = (h.X - h.balls.front().center).norm() < h.balls.front().radius &&
                (h.Y - h.balls.back().center).norm() < h.balls.back().radius;
  c.linked = true;
  for (std::size_t i = 0; i + 1 < h.balls.size(); ++i)
    if ((h.balls[i].center - h.balls[i + 1].center).norm() >= h.balls[i].radius + h.balls[i + 1].radius)
      c.linked = false;
  c.inside = true;
  for (const auto& b : h.balls) {
    auto p = E.project(b.center);
    double gap = p.distance - b.radius;
    if (!E.in_domain(b.center) || !(gap > 0)) {
      c.inside = false;
      continue;
    }
    c.ratio = std::max({c.ratio, 2 * b.radius / gap, gap / (2 * b.radius)});
  }
  return c;
}

CubeCorkscrew cube_corkscrew(const DyadicGrid& g, const WhitneyDecomposition& W, const CubeRef& Q,
                             const WqOptions& opt) {
  const BoundaryModel& E = g.boundary();
  const double reach = opt.resolve_c0(E.ambient_dim()) * Q.side();
  const Point xq = Q.center;
  std::optional<WhitneyCube> best;
  auto key = [&](const WhitneyCube& I) {
    return std::make_pair(std::abs(I.k - Q.k), (I.center() - xq).norm());
  };
  for (int ks = Q.k; ks <= Q.k + 10; ++ks) {
    W.visit(Q.region.inflate(reach), ks, [&](const WhitneyCube& I) {
      if (I.exterior || I.k < Q.k - opt.m0) return;
      if (g.distance(Q, I.box()) > reach) return;
      if (!best || key(I) < key(*best) || (key(I) == key(*best) && lex_less(I.center(), best->center())))
        best = I;
    });
    if (best && std::abs(best->k - Q.k) <= ks - Q.k) break;
  }
  if (!best) throw SearchFailure("no interior Whitney cube near Q");
  CubeCorkscrew r;
  r.cube = *best;
  r.X = best->center();
  const double diam = std::max(Q.region.diameter(), 1e-300);
  r.delta_ratio = delta(E, r.X) / diam;
  r.dist_ratio = g.distance(Q, r.X) / diam;
  return r;
}

nlohmann::json NtaReport::to_json() const {
  nlohmann::json rows_j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json chains = nlohmann::json::object();
    for (auto [L, N] : r.chain_lengths) chains[std::to_string(static_cast<int>(L))] = N;
    rows_j.push_back({{"scale", r.scale}, {"c", r.c}, {"corkscrew_ok", r.corkscrew_ok}, {"chain_lengths", chains}});
  }
  return {{"rows", rows_j}, {"c_min", c_min}};
}

NtaReport nta_diagnostics(const BoundaryModel& E, const Point& x, const std::vector<double>& scales,
                          const std::vector<double>& lambdas) {
  NtaReport rep;
  const int d = E.ambient_dim();
  for (double r : scales) {
    NtaRow row;
    row.scale = r;
    CorkscrewResult ck;
    try {
      ck = corkscrew(E, x, r);
      row.c = ck.c;
      row.corkscrew_ok = true;
    } catch (const SearchFailure&) {
      rep.rows.push_back(row);
      rep.c_min = 0;
      continue;
    }
    rep.c_min = std::min(rep.c_min, row.c);
    const double rho = ck.c * r;
    for (double L : lambdas) {
      long worst = 0;
      for (int i = 0; i < d; ++i)
        for (double s : {1.0, -1.0}) {
          Point Y = ck.X + s * L * rho * unit(d, i);
          if (!E.in_domain(Y) || delta(E, Y) < rho) continue;
          try {
            worst = std::max(worst, static_cast<long>(harnack_chain(E, ck.X, Y, rho, L).size()));
          } catch (const ConnectivityError&) {
            worst = -1;
          }
          if (worst < 0) break;
        }
      row.chain_lengths.push_back({L, worst});
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace rectilab
