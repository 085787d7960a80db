#include "rectilab/whitney.hpp"

#include "rectilab/rng.hpp"
#include "rectilab/spatial_index.hpp"

#include <algorithm>
#include <cmath>

namespace rectilab {

Side side_from_string(const std::string& s) {
  if (s == "interior") return Side::Interior;
  if (s == "exterior") return Side::Exterior;
  if (s == "both") return Side::Both;
  throw ArgumentError("unknown side '" + s + "'");
}

Box WhitneyCube::box() const {
  const double s = side();
  Point lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    lo(i) = static_cast<double>(idx[i]) * s;
    hi(i) = lo(i) + s;
  }
  return {lo, hi};
}

WhitneyCube WhitneyCube::parent() const {
  WhitneyCube p = *this;
  p.k = k - 1;
  for (int i = 0; i < d; ++i) p.idx[i] = idx[i] >= 0 ? idx[i] / 2 : -((-idx[i] + 1) / 2);
  return p;
}

WhitneyCube WhitneyCube::child(int mask) const {
  WhitneyCube c = *this;
  c.k = k + 1;
  for (int i = 0; i < d; ++i) c.idx[i] = 2 * idx[i] + ((mask >> i) & 1);
  return c;
}

std::size_t WhitneyCubeHash::operator()(const WhitneyCube& c) const {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(c.k) + 0x51ed27);
  for (int i = 0; i < c.d; ++i) h = splitmix64(h ^ static_cast<std::uint64_t>(c.idx[i]));
  return static_cast<std::size_t>(h);
}

WhitneyCube dyadic_cube_at(const Point& x, int k) {
  WhitneyCube c;
  c.k = k;
  c.d = static_cast<int>(x.size());
  if (c.d > kMaxDim) throw ArgumentError("dimension too large");
  for (int i = 0; i < c.d; ++i) c.idx[i] = static_cast<long long>(std::floor(std::ldexp(x(i), k)));
  return c;
}

WhitneyDecomposition::WhitneyDecomposition(BoundaryPtr E, const Box& window, Side side,
                                           const WhitneyOptions& opt)
    : E_(std::move(E)), window_(window), side_(side), opt_(opt) {
  if (!E_) throw ArgumentError("null boundary");
  if (window.dim() != E_->ambient_dim() || window.is_empty()) throw ArgumentError("bad Whitney window");
  if (opt.ratio <= 0) throw ArgumentError("Whitney ratio must be positive");
  const double ext = window.extent().maxCoeff();
  if (!(ext > 0) || !std::isfinite(ext)) throw ArgumentError("Whitney window must be a bounded box");
  k_top_ = -static_cast<int>(std::ceil(std::log2(ext)));
  if (k_top_ >= opt.k_finest) throw ArgumentError("k_finest is coarser than the window");
  WhitneyCube lo = dyadic_cube_at(window.lo, k_top_), hi = dyadic_cube_at(window.hi, k_top_);
  const int d = window.dim();
  WhitneyCube c = lo;
  while (true) {
    top_.push_back(c);
    int i = 0;
    while (i < d && ++c.idx[i] > hi.idx[i]) {
      c.idx[i] = lo.idx[i];
      ++i;
    }
    if (i == d) break;
  }
}

WhitneyDecomposition::State WhitneyDecomposition::classify(const WhitneyCube& c) const {
  const Box b = c.box();
  if (!b.intersects(window_)) return State::Outside;
  const double dist = E_->distance_to_box(b);
  if (dist >= opt_.ratio * c.diameter()) {
    const bool ext = !E_->in_domain(b.center());
    if ((side_ == Side::Interior && ext) || (side_ == Side::Exterior && !ext)) return State::Outside;
    return State::Accept;
  }
  if (c.k >= opt_.k_finest) return State::Outside;
  return State::Split;
}

void WhitneyDecomposition::descend(const WhitneyCube& c, const Box& region, int k_stop,
                                   const std::function<void(const WhitneyCube&)>& f) const {
  if (!c.box().intersects(region)) return;
  switch (classify(c)) {
    case State::Outside:
      return;
    case State::Accept: {
      WhitneyCube a = c;
      a.exterior = !E_->in_domain(c.center());
      f(a);
      return;
    }
    case State::Split:
      if (c.k >= k_stop) return;
      for (int m = 0; m < (1 << c.d); ++m) descend(c.child(m), region, k_stop, f);
  }
}

void WhitneyDecomposition::visit(const Box& region, int k_stop,
                                 const std::function<void(const WhitneyCube&)>& f) const {
  k_stop = std::min(k_stop, opt_.k_finest);
  for (const auto& t : top_) descend(t, region, k_stop, f);
}

std::vector<WhitneyCube> WhitneyDecomposition::cubes(const Box& region, int k_stop) const {
  std::vector<WhitneyCube> out;
  visit(region, k_stop, [&](const WhitneyCube& c) { out.push_back(c); });
  return out;
}

std::optional<WhitneyCube> WhitneyDecomposition::containing(const Point& x, int k_stop) const {
  k_stop = std::min(k_stop, opt_.k_finest);
  WhitneyCube c = dyadic_cube_at(x, k_top_);
  if (std::find(top_.begin(), top_.end(), c) == top_.end()) return std::nullopt;
  while (true) {
    switch (classify(c)) {
      case State::Outside:
        return std::nullopt;
      case State::Accept:
        c.exterior = !E_->in_domain(c.center());
        return c;
      case State::Split:
        if (c.k >= k_stop) return std::nullopt;
        c = dyadic_cube_at(x, c.k + 1);
    }
  }
}

bool touching(const WhitneyCube& a, const WhitneyCube& b) { return a.box().intersects(b.box()); }

bool face_adjacent(const WhitneyCube& a, const WhitneyCube& b) {
  const Box x = a.box(), y = b.box();
  if (!x.intersects(y) || a == b) return false;
  int thick = 0;
  for (int i = 0; i < a.d; ++i)
    if (std::min(x.hi(i), y.hi(i)) > std::max(x.lo(i), y.lo(i))) ++thick;
  return thick == a.d - 1;
}

std::vector<WhitneyCube> WhitneyDecomposition::neighbors(const WhitneyCube& I) const {
  std::vector<WhitneyCube> out;
  visit(I.box().inflate(1e-9 * I.side()), I.k + 4, [&](const WhitneyCube& J) {
    if (!(J == I) && touching(I, J)) out.push_back(J);
  });
  return out;
}

std::vector<WhitneyCube> WhitneyDecomposition::face_neighbors(const WhitneyCube& I) const {
  auto all = neighbors(I);
  std::vector<WhitneyCube> out;
  for (const auto& J : all)
    if (face_adjacent(I, J)) out.push_back(J);
  return out;
}

WhitneyCheck whitney_check(const BoundaryModel& E, const WhitneyCube& I) {
  WhitneyCheck c;
  c.diam = I.diameter();
  c.dist = E.distance_to_box(I.box());
  c.dist4 = E.distance_to_box(I.box().dilate(4.0));
  c.pass = 4.0 * c.diam <= c.dist4 && c.dist4 <= c.dist && c.dist <= 40.0 * c.diam;
  return c;
}

WhitneyReport verify_whitney(const WhitneyDecomposition& W, const Box& region, int k_stop) {
  WhitneyReport r;
  auto cubes = W.cubes(region, k_stop);
  r.cubes = cubes.size();
  for (const auto& I : cubes) {
    auto c = whitney_check(W.boundary(), I);
    if (!c.pass) ++r.violations_distance;
    r.min_ratio = std::min(r.min_ratio, c.dist / c.diam);
    r.max_ratio = std::max(r.max_ratio, c.dist / c.diam);
    if (I.k >= W.k_finest() - 4) continue;
    for (const auto& J : W.neighbors(I)) {
      double q = J.diameter() / I.diameter();
      r.max_neighbor_ratio = std::max(r.max_neighbor_ratio, q);
      if (q > 4.0 || q < 0.25) ++r.violations_neighbor;
    }
  }
  return r;
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda <= 0.5 * kLambda0))
    throw ArgumentError("lambda must lie in (0, " + std::to_string(0.5 * kLambda0) + "]");
}

Box fatten(const WhitneyCube& I, double lambda) { return I.box().dilate(1.0 + lambda); }

namespace {
// Sup of tau with tau J disjoint from the closed box F (both axis-aligned).
double tau_limit(const Box& J, const Box& F) {
  double best = -kInf;
  const Point cj = J.center();
  for (int i = 0; i < J.dim(); ++i) {
    double half = 0.5 * (J.hi(i) - J.lo(i));
    double gap = std::max(F.lo(i) - cj(i), cj(i) - F.hi(i));
    best = std::max(best, gap / half);
  }
  return best;
}
}  // namespace

FatteningReport pairwise_fattening_check(const BoundaryModel& E, const std::vector<WhitneyCube>& cubes,
                                         double lambda) {
  check_lambda(lambda);
  FatteningReport r;
  std::vector<Box> fat2;
  fat2.reserve(cubes.size());
  for (const auto& I : cubes) {
    Box f = I.box().dilate(1.0 + 2.0 * lambda);
    r.min_gap = std::min(r.min_gap, E.distance_to_box(f) / I.diameter());
    fat2.push_back(f);
  }
  BoxTree tree(fat2);
  for (std::size_t i = 0; i < cubes.size(); ++i) {
    const Box fi = fatten(cubes[i], lambda);
    tree.query(fat2[i], [&](std::size_t j) {
      if (j <= i) return;
      ++r.pairs;
      const Box fj = fatten(cubes[j], lambda);
      const bool touch = touching(cubes[i], cubes[j]);
      if (touch) ++r.touching;
      if (touch != fi.interiors_intersect(fj)) ++r.violations_overlap;
      r.tau = std::min({r.tau, tau_limit(cubes[j].box(), fi), tau_limit(cubes[i].box(), fj)});
    });
  }
  r.pass = r.violations_overlap == 0 && r.tau > 0.5 && r.min_gap > 0;
  return r;
}

double WqOptions::resolve_c0(int d) const {
  if (c0 > 0) return c0;
  return paper_constants ? 1000.0 * std::sqrt(static_cast<double>(d - 1)) : 8.0 * std::sqrt(static_cast<double>(d));
}

bool in_w_q(const DyadicGrid& g, const WhitneyCube& I, const CubeRef& Q, const WqOptions& opt) {
  if (I.k < Q.k - opt.m0 || I.k > Q.k + 1) return false;
  return g.distance(Q, I.box()) <= opt.resolve_c0(I.d) * Q.side();
}

std::vector<WhitneyCube> w_q(const DyadicGrid& g, const WhitneyDecomposition& W, const CubeRef& Q,
                             const WqOptions& opt) {
  if (opt.m0 < 0) throw ArgumentError("m0 must be non-negative");
  const double reach = opt.resolve_c0(W.boundary().ambient_dim()) * Q.side();
  std::vector<WhitneyCube> out;
  W.visit(Q.region.inflate(reach), Q.k + 1, [&](const WhitneyCube& I) {
    if (in_w_q(g, I, Q, opt)) out.push_back(I);
  });
  if (out.empty()) throw ConfigError("W_Q is empty; enlarge the Whitney window or C0");
  return out;
}

}  // namespace rectilab
