#include "rectilab/sawtooth.hpp"

#include "rectilab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace rectilab {

bool interior_by_directions(const Point& X, double eps, const std::function<bool(const Point&)>& closed) {
  if (!closed(X)) return false;
  const int d = static_cast<int>(X.size());
  int total = 1;
  for (int i = 0; i < d; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    Point u(d);
    int c = code;
    for (int i = 0; i < d; ++i) {
      u(i) = static_cast<double>(c % 3) - 1.0;
      c /= 3;
    }
    if (u.squaredNorm() == 0) continue;
    if (!closed(X + eps * u.normalized())) return false;
  }
  return true;
}

BoxUnion::BoxUnion(std::vector<Box> boxes) : boxes_(std::move(boxes)), tree_(boxes_) {}

bool BoxUnion::contains_closed(const Point& X) const {
  bool hit = false;
  tree_.query(Box{X, X}, [&](std::size_t) { hit = true; });
  return hit;
}

bool BoxUnion::contains(const Point& X) const {
  if (boxes_.empty()) return false;
  bool open = false, closed = false;
  double side = kInf;
  tree_.query(Box{X, X}, [&](std::size_t i) {
    closed = true;
    if (boxes_[i].contains_open(X)) open = true;
    side = std::min(side, boxes_[i].extent().minCoeff());
  });
  if (open) return true;
  if (!closed) return false;
  return interior_by_directions(X, 1e-6 * side, [&](const Point& Y) { return contains_closed(Y); });
}

std::vector<Box> union_boundary_faces(const std::vector<Box>& boxes) {
  std::vector<Box> out;
  if (boxes.empty()) return out;
  const int d = boxes.front().dim();
  if (d < 2 || d > 3) throw ArgumentError("union faces need d = 2 or 3");
  BoxTree tree(boxes);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const Box& B = boxes[b];
    for (int a = 0; a < d; ++a)
      for (int hi_side = 0; hi_side < 2; ++hi_side) {
        const double p = hi_side ? B.hi(a) : B.lo(a);
        Box face = B;
        face.lo(a) = face.hi(a) = p;
        // Boxes containing points just outside the face.
        std::vector<Box> cover;
        tree.query(face, [&](std::size_t j) {
          if (j == b) return;
          const Box& C = boxes[j];
          bool crosses = hi_side ? (C.lo(a) <= p && p < C.hi(a)) : (C.lo(a) < p && p <= C.hi(a));
          // coplanar faces pointing the same way: the first box owns the overlap
          if (!crosses && j < b) crosses = hi_side ? C.hi(a) == p : C.lo(a) == p;
          if (crosses) cover.push_back(C);
        });
        std::vector<int> tang;
        for (int i = 0; i < d; ++i)
          if (i != a) tang.push_back(i);
        if (cover.empty()) {
          out.push_back(face);
          continue;
        }
        bool whole = false;
        for (const Box& C : cover) {
          bool in = true;
          for (int t : tang) in = in && C.lo(t) <= face.lo(t) && face.hi(t) <= C.hi(t);
          if (in) {
            whole = true;
            break;
          }
        }
        if (whole) continue;
        // Coordinate compression over the tangential axes.
        std::vector<std::vector<double>> cuts(tang.size());
        for (std::size_t t = 0; t < tang.size(); ++t) {
          int i = tang[t];
          auto& c = cuts[t];
          c = {face.lo(i), face.hi(i)};
          for (const Box& C : cover) {
            if (C.lo(i) > face.lo(i) && C.lo(i) < face.hi(i)) c.push_back(C.lo(i));
            if (C.hi(i) > face.lo(i) && C.hi(i) < face.hi(i)) c.push_back(C.hi(i));
          }
          std::sort(c.begin(), c.end());
          c.erase(std::unique(c.begin(), c.end()), c.end());
        }
        const std::size_t n0 = cuts[0].size() - 1, n1 = tang.size() > 1 ? cuts[1].size() - 1 : 1;
        for (std::size_t j = 0; j < n1; ++j) {
          std::size_t run = n0;  // start of the current uncovered run along the first axis
          for (std::size_t i = 0; i <= n0; ++i) {
            bool free = false;
            if (i < n0) {
              Point m = face.center();
              m(tang[0]) = 0.5 * (cuts[0][i] + cuts[0][i + 1]);
              if (tang.size() > 1) m(tang[1]) = 0.5 * (cuts[1][j] + cuts[1][j + 1]);
              free = true;
              for (const Box& C : cover) {
                bool in = true;
                for (int t : tang) in = in && C.lo(t) <= m(t) && m(t) <= C.hi(t);
                if (in) {
                  free = false;
                  break;
                }
              }
            }
            if (free && run == n0) run = i;
            if (!free && run != n0) {
              Box f = face;
              f.lo(tang[0]) = cuts[0][run];
              f.hi(tang[0]) = cuts[0][i];
              if (tang.size() > 1) {
                f.lo(tang[1]) = cuts[1][j];
                f.hi(tang[1]) = cuts[1][j + 1];
              }
              out.push_back(f);
              run = n0;
            }
          }
        }
      }
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json WhitneyRegion::metadata() const {
  return {{"augmentation", "breadth-first tree of face-adjacent cubes rooted at the cube of X_Q; "
                           "circumscribed balls of the tree cubes; W* = cubes meeting a ball"},
          {"k", Q.k},
          {"lambda", lambda},
          {"w", w.size()},
          {"w_star", w_star.size()},
          {"k_star", k_star},
          {"K0", K0},
          {"chain_cubes", chain_cubes},
          {"fallback_chains", fallback_chains},
          {"contains_xq", contains_xq},
          {"contains_children", contains_children},
          {"chains_inside", chains_inside}};
}

namespace {

using CubeSet = std::unordered_set<WhitneyCube, WhitneyCubeHash>;
using Parents = std::unordered_map<WhitneyCube, WhitneyCube, WhitneyCubeHash>;
constexpr std::size_t kMaxCubes = 200000;

// Breadth-first search from src over face neighbours accepted by allow.
void bfs(const WhitneyDecomposition& W, const WhitneyCube& src, const std::function<bool(const WhitneyCube&)>& allow,
         Parents& parent, std::size_t limit) {
  std::deque<WhitneyCube> q;
  if (!parent.count(src)) {
    parent.emplace(src, src);
    q.push_back(src);
  } else {
    for (const auto& [c, p] : parent) q.push_back(c);
  }
  while (!q.empty() && parent.size() < limit) {
    WhitneyCube c = q.front();
    q.pop_front();
    for (const auto& J : W.face_neighbors(c)) {
      if (parent.count(J) || !allow(J)) continue;
      parent.emplace(J, c);
      q.push_back(J);
    }
  }
}

}  // namespace

WhitneyRegion whitney_region(const DyadicGrid& g, const WhitneyDecomposition& W, const CubeRef& Q,
                             const RegionOptions& opt) {
  check_lambda(opt.lambda);
  WhitneyRegion R;
  R.Q = Q;
  R.lambda = opt.lambda;
  R.w = w_q(g, W, Q, opt.wq);
  auto ck = cube_corkscrew(g, W, Q, opt.wq);
  R.X_Q = ck.X;

  CubeSet members(R.w.begin(), R.w.end());
  Parents parent;
  const WhitneyCube src = ck.cube;
  bfs(W, src, [&](const WhitneyCube& J) { return members.count(J) > 0; }, parent, kMaxCubes);
  bool missing = false;
  for (const auto& I : R.w) missing = missing || !parent.count(I);
  if (missing) {
    // Widen the graph to nearby Whitney cubes of comparable size.
    const double c0 = opt.wq.resolve_c0(W.boundary().ambient_dim());
    ++R.fallback_chains;
    bfs(W, src,
        [&](const WhitneyCube& J) {
          return !J.exterior && std::abs(J.k - Q.k) <= opt.wq.m0 + 3 && g.distance(Q, J.box()) <= 2 * c0 * Q.side();
        },
        parent, kMaxCubes);
    for (const auto& I : R.w)
      if (!parent.count(I)) throw ConnectivityError("W_Q member not connected to the cube of X_Q");
  }
  // Cubes on the chains from the members to X_Q.
  CubeSet path;
  for (const auto& I : R.w) {
    WhitneyCube c = I;
    while (path.insert(c).second && !(c == src)) c = parent.at(c);
  }
  path.insert(src);
  R.chain_cubes = path.size();

  CubeSet star(R.w.begin(), R.w.end());
  std::vector<std::pair<Point, double>> balls;
  for (const auto& J : path) {
    const Point c = J.center();
    const double rad = 0.5 * J.diameter() * (1 + 1e-9);
    balls.push_back({c, rad});
    W.visit(Box::around(c, rad), J.k + 4, [&](const WhitneyCube& K) {
      if (K.box().distance(c) < rad) star.insert(K);
    });
  }
  R.w_star.assign(star.begin(), star.end());
  std::sort(R.w_star.begin(), R.w_star.end());
  for (const auto& I : R.w_star) {
    R.k_star = std::max(R.k_star, std::abs(I.k - Q.k));
    R.K0 = std::max(R.K0, g.distance(Q, I.box()) / Q.side());
  }

  std::vector<Box> f1, f2;
  for (const auto& I : R.w_star) {
    f1.push_back(fatten(I, opt.lambda));
    f2.push_back(fatten(I, 2 * opt.lambda));
  }
  R.u = BoxUnion(std::move(f1));
  R.u_star = BoxUnion(std::move(f2));
  R.contains_xq = R.u.contains(R.X_Q);
  R.contains_children = true;
  for (const auto& c : g.children(Q)) R.contains_children = R.contains_children && R.u.contains(cube_corkscrew(g, W, c, opt.wq).X);
  R.chains_inside = true;
  const int d = W.boundary().ambient_dim();
  for (const auto& [c, rad] : balls) {
    if (!R.u.contains(c)) R.chains_inside = false;
    for (int i = 0; i < d && R.chains_inside; ++i)
      for (double s : {-1.0, 1.0})
        if (!R.u.contains(c + s * (1 - 1e-6) * rad * unit(d, i))) R.chains_inside = false;
  }
  return R;
}

// ---------------------------------------------------------------------------

std::string to_string(SawtoothKind k) {
  switch (k) {
    case SawtoothKind::CarlesonBox:
      return "carleson-box";
    case SawtoothKind::BallBox:
      return "ball-box";
    case SawtoothKind::Global:
      return "global";
    case SawtoothKind::Local:
      return "local";
    case SawtoothKind::Approx:
      return "approx";
  }
  return "?";
}

SawtoothDomain::SawtoothDomain(GridPtr g, std::shared_ptr<const WhitneyDecomposition> W, SawtoothKind kind,
                               CubePredicate member, int k_lo, int k_hi, std::optional<Box> bounds,
                               const RegionOptions& opt, bool doubled)
    : g_(std::move(g)),
      W_(std::move(W)),
      kind_(kind),
      member_(std::move(member)),
      k_lo_(k_lo),
      k_hi_(k_hi),
      bounds_(std::move(bounds)),
      opt_(opt),
      doubled_(doubled) {
  check_lambda(opt.lambda);
  if (!g_ || !W_) throw ArgumentError("sawtooth needs a grid and a Whitney decomposition");
  c0_ = opt.wq.resolve_c0(W_->boundary().ambient_dim());
}

bool SawtoothDomain::belongs(const WhitneyCube& I) const {
  if (I.exterior) return false;
  const int lo = std::max(I.k - 1, k_lo_), hi = std::min(I.k + opt_.wq.m0, k_hi_);
  for (int k = lo; k <= hi; ++k) {
    if (!g_->resolves(k)) continue;
    const double margin = c0_ * std::ldexp(1.0, -k);
    if (g_->visit_near(I.box(), k, margin, bounds_ ? &*bounds_ : nullptr, member_)) return true;
  }
  return false;
}

bool SawtoothDomain::contains_closed(const Point& X, bool& open_hit) const {
  open_hit = false;
  auto I = W_->containing(X);
  if (!I) return false;
  const double dil = dilation();
  std::vector<WhitneyCube> cand{*I};
  const Box b = I->box();
  double inner = kInf;
  for (int i = 0; i < b.dim(); ++i) inner = std::min({inner, X(i) - b.lo(i), b.hi(i) - X(i)});
  if (inner <= 0.5 * (dil - 1.0) * 4.0 * I->side()) {
    auto nb = W_->neighbors(*I);
    cand.insert(cand.end(), nb.begin(), nb.end());
  }
  bool closed = false;
  for (const auto& J : cand) {
    const Box f = J.box().dilate(dil);
    if (!f.contains(X)) continue;
    if (!belongs(J)) continue;
    closed = true;
    if (f.contains_open(X)) {
      open_hit = true;
      return true;
    }
  }
  return closed;
}

bool SawtoothDomain::contains(const Point& X) const {
  bool open = false;
  if (!contains_closed(X, open)) return false;
  if (open) return true;
  auto I = W_->containing(X);
  const double eps = 1e-6 * I->side();
  return interior_by_directions(X, eps, [&](const Point& Y) {
    bool o = false;
    return contains_closed(Y, o);
  });
}

Box SawtoothDomain::reach() const {
  const Box& win = W_->window();
  if (!bounds_) return win;
  const double top = std::ldexp(1.0, -k_lo_);
  const double grow = c0_ * top + std::ldexp(1.0, opt_.wq.m0) * top * std::sqrt(static_cast<double>(win.dim())) * dilation();
  Box r = bounds_->inflate(grow);
  r.lo = r.lo.cwiseMax(win.lo);
  r.hi = r.hi.cwiseMin(win.hi);
  return r;
}

std::vector<WhitneyCube> SawtoothDomain::members(int k_stop) const {
  std::vector<WhitneyCube> out;
  W_->visit(reach(), k_stop, [&](const WhitneyCube& I) {
    if (belongs(I)) out.push_back(I);
  });
  return out;
}

std::shared_ptr<PolyhedralBoundary> SawtoothDomain::to_boundary(int k_stop) const {
  auto cubes = members(k_stop);
  if (cubes.empty()) throw ConfigError("sawtooth domain has no member cubes");
  std::vector<Box> boxes;
  boxes.reserve(cubes.size());
  for (const auto& I : cubes) boxes.push_back(I.box().dilate(dilation()));
  auto faces = union_boundary_faces(boxes);
  auto U = std::make_shared<const BoxUnion>(std::move(boxes));
  return std::make_shared<PolyhedralBoundary>(W_->boundary().ambient_dim(), std::move(faces),
                                              [U](const Point& X) { return U->contains(X); });
}

namespace {
constexpr int kDeep = 60;

Box regions_bounds(const std::vector<CubeRef>& cubes) {
  Box b = Box::empty(cubes.front().region.dim());
  for (const auto& q : cubes) b.expand(q.region);
  return b;
}
}  // namespace

SawtoothDomain carleson_box(GridPtr g, WhitneyPtr W, const CubeRef& Q, const RegionOptions& opt, bool doubled) {
  const DyadicGrid* gp = g.get();
  auto member = [gp, Q](const CubeRef& P) { return P.k >= Q.k && gp->ancestor(P, Q.k) == Q; };
  return SawtoothDomain(std::move(g), std::move(W), SawtoothKind::CarlesonBox, member, Q.k, kDeep, Q.region, opt,
                        doubled);
}

BallBox ball_box_cubes(const DyadicGrid& g, const Point& x, double r) {
  if (!(r > 0)) throw ArgumentError("ball radius must be positive");
  BallBox bb;
  bb.k = static_cast<int>(std::floor(-std::log2(200.0 * r)));
  if (!g.resolves(bb.k)) throw ConfigError("generation k(Delta) = " + std::to_string(bb.k) + " is not in the grid");
  for (auto& q : g.cubes_near(Box{x, x}, bb.k, 2 * r))
    if (g.distance(q, x) < 2 * r) bb.cubes.push_back(q);
  if (bb.cubes.empty()) throw ConfigError("no cube of generation k(Delta) meets 2 Delta");
  return bb;
}

SawtoothDomain carleson_box_ball(GridPtr g, WhitneyPtr W, const Point& x, double r, const RegionOptions& opt) {
  auto bb = ball_box_cubes(*g, x, r);
  const DyadicGrid* gp = g.get();
  auto member = [gp, bb](const CubeRef& P) {
    if (P.k < bb.k) return false;
    CubeRef a = gp->ancestor(P, bb.k);
    return std::find(bb.cubes.begin(), bb.cubes.end(), a) != bb.cubes.end();
  };
  return SawtoothDomain(std::move(g), std::move(W), SawtoothKind::BallBox, member, bb.k, kDeep,
                        regions_bounds(bb.cubes), opt);
}

SawtoothDomain sawtooth(GridPtr g, WhitneyPtr W, const std::vector<CubeRef>& F, std::optional<CubeRef> Q0,
                        const RegionOptions& opt) {
  for (std::size_t i = 0; i < F.size(); ++i)
    for (std::size_t j = 0; j < F.size(); ++j) {
      if (i == j) continue;
      if (F[i].k <= F[j].k && g->ancestor(F[j], F[i].k) == F[i])
        throw ArgumentError("sawtooth family is not pairwise disjoint");
    }
  // Family keyed by generation and centre.
  std::map<int, std::set<std::vector<double>>> fam;
  for (const auto& q : F) fam[q.k].insert(std::vector<double>(q.center.data(), q.center.data() + q.center.size()));
  const DyadicGrid* gp = g.get();
  auto member = [gp, fam, Q0](const CubeRef& P) {
    if (Q0 && (P.k < Q0->k || !(gp->ancestor(P, Q0->k) == *Q0))) return false;
    for (const auto& [k, centers] : fam) {
      if (k > P.k) break;
      CubeRef a = gp->ancestor(P, k);
      if (centers.count(std::vector<double>(a.center.data(), a.center.data() + a.center.size()))) return false;
    }
    return true;
  };
  const int k_lo = Q0 ? Q0->k : g->k_min();
  std::optional<Box> bounds;
  if (Q0) bounds = Q0->region;
  return SawtoothDomain(std::move(g), std::move(W), Q0 ? SawtoothKind::Local : SawtoothKind::Global, member, k_lo,
                        kDeep, bounds, opt);
}

SawtoothDomain approx_domain(GridPtr g, WhitneyPtr W, int N, const RegionOptions& opt) {
  if (N <= g->k_min()) throw ArgumentError("N must exceed the coarsest grid generation");
  const int k_lo = g->k_min();
  auto member = [N](const CubeRef& P) { return P.k <= N - 1; };
  return SawtoothDomain(std::move(g), std::move(W), SawtoothKind::Approx, member, k_lo, N - 1, std::nullopt, opt);
}

std::shared_ptr<PolyhedralBoundary> approx_boundary(GridPtr g, WhitneyPtr W, int N, const RegionOptions& opt) {
  return approx_domain(std::move(g), std::move(W), N, opt).to_boundary(N);
}

ContainmentReport ball_inside(const SawtoothDomain& D, const Ball& B, std::size_t n, std::uint64_t seed) {
  ContainmentReport rep;
  const BoundaryModel& E = D.whitney().boundary();
  Rng rng(derive_seed(seed, 0, 0xba11));
  const int d = E.ambient_dim();
  for (std::size_t i = 0; i < n; ++i) {
    Point Y = B.center + B.radius * rng.in_ball(d);
    ++rep.samples;
    if (!E.in_domain(Y)) continue;
    ++rep.hits;
    if (!D.contains(Y)) ++rep.counterexamples;
  }
  return rep;
}

ContainmentReport inside_ball(const SawtoothDomain& D, const Point& center, double scale, int k_stop, std::size_t n,
                              std::uint64_t seed) {
  ContainmentReport rep;
  const BoundaryModel& E = D.whitney().boundary();
  for (const auto& I : D.members(k_stop))
    rep.kappa = std::max(rep.kappa, I.box().dilate(D.dilation()).max_distance(center) / scale);
  rep.kappa *= 1 + 1e-9;
  Rng rng(derive_seed(seed, 0, 0xb0c5));
  const int d = E.ambient_dim();
  const double half = 1.05 * rep.kappa * scale;
  for (std::size_t i = 0; i < n; ++i) {
    Point Y(d);
    for (int j = 0; j < d; ++j) Y(j) = center(j) + rng.uniform(-half, half);
    ++rep.samples;
    if (!D.contains(Y)) continue;
    ++rep.hits;
    bool in_closure = E.in_domain(Y) || E.project(Y).distance == 0.0;
    if ((Y - center).norm() >= rep.kappa * scale || !in_closure) ++rep.counterexamples;
  }
  return rep;
}

}  // namespace rectilab
