#include "rectilab/functionals.hpp"

#include "rectilab/parallel.hpp"
#include "rectilab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_map>

namespace rectilab {

using nlohmann::json;

namespace {

json point_json(const Point& p) { return std::vector<double>(p.data(), p.data() + p.size()); }

double smoothstep5(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10 - 15 * s + 6 * s * s);
}

struct PointKey {
  std::array<double, 4> v{};
  bool operator==(const PointKey& o) const { return v == o.v; }
};
struct PointKeyHash {
  std::size_t operator()(const PointKey& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (double x : k.v) {
      std::uint64_t b;
      std::memcpy(&b, &x, sizeof b);
      h = splitmix64(h ^ b);
    }
    return static_cast<std::size_t>(h);
  }
};

// Distinct evaluation points shared between apexes.
class CellIndex {
 public:
  std::size_t add(const Point& X) {
    PointKey k;
    for (int i = 0; i < X.size(); ++i) k.v[i] = X(i);
    auto [it, fresh] = map_.try_emplace(k, points.size());
    if (fresh) points.push_back(X);
    return it->second;
  }
  std::vector<Point> points;

 private:
  std::unordered_map<PointKey, std::size_t, PointKeyHash> map_;
};

struct CellRef {
  std::size_t id;
  double vol;
  int level;
};

double farthest(const Box& b, const Point& c) {
  double s = 0;
  for (int i = 0; i < c.size(); ++i) {
    const double e = std::max(std::abs(b.lo(i) - c(i)), std::abs(b.hi(i) - c(i)));
    s += e * e;
  }
  return std::sqrt(s);
}

double lq_norm(const std::vector<double>& w, const std::vector<double>& f, double q) {
  std::vector<double> t(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) t[i] = w[i] * std::pow(f[i], q);
  return std::pow(pairwise_sum(t), 1.0 / q);
}

}  // namespace

// ---------------------------------------------------------------------------

void FunctionalReport::flag(const std::string& f) {
  if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
}

json FunctionalReport::to_json() const {
  json rows = json::array();
  for (const auto& r : sweep)
    rows.push_back({{"scale", r.scale},
                    {"lhs", r.lhs},
                    {"rhs", r.rhs},
                    {"constant", r.constant},
                    {"stderr", r.std_err},
                    {"pass", r.pass}});
  return {{"id", id},       {"lhs", lhs},     {"rhs", rhs},     {"constant", constant}, {"tolerance", tolerance},
          {"stderr", std_err}, {"pass", pass}, {"sweep", rows}, {"flags", flags},       {"extra", extra}};
}

// ---------------------------------------------------------------------------

double cube_sigma(const DyadicGrid& g, const CubeRef& Q) {
  if (Q.id >= 0) return g.cube(Q.id).sigma;
  if (g.flat()) return std::pow(Q.side(), g.boundary().dim());
  throw ArgumentError("cube generation is not built");
}

double cube_outer_radius(const DyadicGrid& g, const CubeRef& Q) {
  if (g.flat()) return 0.5 * Q.side() * std::sqrt(static_cast<double>(g.boundary().dim()));
  if (Q.id >= 0) return g.cube(Q.id).outer;
  throw ArgumentError("cube generation is not built");
}

bool in_cube(const DyadicGrid& g, const CubeRef& Q, const Point& y) {
  if (g.flat()) {
    const int n = g.boundary().dim();
    for (int i = 0; i < n; ++i)
      if (y(i) < Q.region.lo(i) || y(i) >= Q.region.hi(i)) return false;
    return std::abs(y(n) - Q.region.lo(n)) <= 1e-9 * Q.side();
  }
  if (Q.id < 0) throw ArgumentError("cube generation is not built");
  return g.locate(y, Q.k) == Q.id;
}

WeightedCloud cube_nodes(const DyadicGrid& g, const CubeRef& Q, double h) {
  if (!(h > 0)) throw ArgumentError("node spacing must be positive");
  if (Q.id >= 0) return g.quadrature(Q.id, h);
  if (!g.flat()) throw ArgumentError("cube generation is not built");
  const int n = g.boundary().dim();
  const int m = std::max(1, static_cast<int>(std::lround(Q.side() / h)));
  const double step = Q.side() / m, w = std::pow(step, n);
  WeightedCloud out;
  out.spacing = step;
  std::vector<int> idx(n, 0);
  while (true) {
    Point p = Q.region.lo;
    for (int i = 0; i < n; ++i) p(i) += (idx[i] + 0.5) * step;
    out.points.push_back(p);
    out.weights.push_back(w);
    int i = 0;
    while (i < n && ++idx[i] == m) idx[i++] = 0;
    if (i == n) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cones

std::string to_string(ConeVariant v) {
  switch (v) {
    case ConeVariant::Gamma: return "gamma";
    case ConeVariant::GammaTilde: return "gamma-tilde";
    case ConeVariant::Lambda: return "lambda";
    case ConeVariant::LambdaExt: return "lambda-ext";
    case ConeVariant::LambdaTwoSided: return "lambda-two-sided";
  }
  return "?";
}

ConeVariant cone_variant_from_string(const std::string& s) {
  for (auto v : {ConeVariant::Gamma, ConeVariant::GammaTilde, ConeVariant::Lambda, ConeVariant::LambdaExt,
                 ConeVariant::LambdaTwoSided})
    if (to_string(v) == s) return v;
  throw ArgumentError("unknown cone variant '" + s + "'");
}

ConeContext cone_context(GridPtr g, double reach, const RegionOptions& region, bool exterior) {
  if (!g) throw ArgumentError("cone context needs a grid");
  Box w = g->window().inflate(reach);
  ConeContext ctx;
  ctx.g = g;
  ctx.region = region;
  ctx.W = std::make_shared<WhitneyDecomposition>(g->boundary_ptr(), w, Side::Interior);
  if (exterior) ctx.Wext = std::make_shared<WhitneyDecomposition>(g->boundary_ptr(), w, Side::Exterior);
  return ctx;
}

std::shared_ptr<const std::vector<WhitneyCube>> WqCache::get(const CubeRef& Q, bool exterior) const {
  auto key = std::make_tuple(exterior, Q.k, std::vector<double>(Q.center.data(), Q.center.data() + Q.center.size()));
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
  }
  const WhitneyDecomposition* W = exterior ? ctx_->Wext.get() : ctx_->W.get();
  if (!W) throw ConfigError("exterior Whitney decomposition missing");
  auto v = std::make_shared<const std::vector<WhitneyCube>>(w_q(*ctx_->g, *W, Q, ctx_->region.wq));
  std::lock_guard<std::mutex> lk(mu_);
  return map_.emplace(key, v).first->second;
}

DyadicCone::DyadicCone(const ConeContext& ctx, const CubeRef& Q0, const Point& x, ConeVariant v, int k_stop,
                       const WqCache* cache)
    : ctx_(&ctx), Q0_(Q0), x_(x), v_(v), k_stop_(k_stop) {
  const DyadicGrid& g = *ctx.g;
  if (k_stop < Q0.k) throw ArgumentError("cone truncation above the base cube");
  if (!in_cube(g, Q0, x)) throw ArgumentError("cone apex outside the base cube");
  check_lambda(ctx.region.lambda);
  if (v == ConeVariant::Gamma) dil_ = 1 + ctx.region.lambda;
  if (v == ConeVariant::GammaTilde) dil_ = 1 + 2 * ctx.region.lambda;
  const bool inner = v != ConeVariant::LambdaExt, outer = v == ConeVariant::LambdaExt || v == ConeVariant::LambdaTwoSided;
  if (outer && !ctx.Wext) throw ConfigError("exterior cones need an exterior Whitney decomposition");

  std::unordered_map<WhitneyCube, int, WhitneyCubeHash> seen;
  for (int k = Q0.k; k <= k_stop; ++k) {
    auto Q = g.ref_at(x, k);
    if (!Q) throw ConfigError("grid does not resolve generation " + std::to_string(k));
    for (bool ext : {false, true}) {
      if ((ext && !outer) || (!ext && !inner)) continue;
      std::shared_ptr<const std::vector<WhitneyCube>> w;
      if (cache)
        w = cache->get(*Q, ext);
      else
        w = std::make_shared<const std::vector<WhitneyCube>>(
            w_q(g, ext ? *ctx.Wext : *ctx.W, *Q, ctx.region.wq));
      for (const auto& I : *w) seen.try_emplace(I, k);
    }
  }
  cubes_.reserve(seen.size());
  for (const auto& [I, k] : seen) cubes_.push_back(I);
  std::sort(cubes_.begin(), cubes_.end());
  levels_.reserve(cubes_.size());
  for (const auto& I : cubes_) levels_.push_back(seen.at(I));
}

Box DyadicCone::box(std::size_t i) const { return dil_ == 1 ? cubes_[i].box() : fatten(cubes_[i], dil_ - 1); }

const BoxTree& DyadicCone::tree() const {
  std::call_once(tree_once_, [&] {
    std::vector<Box> b;
    b.reserve(cubes_.size());
    for (std::size_t i = 0; i < cubes_.size(); ++i) b.push_back(box(i));
    tree_ = std::make_unique<BoxTree>(std::move(b));
  });
  return *tree_;
}

bool DyadicCone::contains(const Point& X) const {
  bool hit = false;
  const BoxTree& t = tree();
  t.query(Box{X, X}, [&](std::size_t i) { hit = hit || t.box(i).contains(X); });
  return hit;
}

std::vector<ConeCell> DyadicCone::cells(int sub) const {
  if (sub < 0 || sub > 4) throw ArgumentError("cell subdivision must be in 0..4");
  std::vector<ConeCell> out;
  const int m = 1 << sub;
  for (std::size_t i = 0; i < cubes_.size(); ++i) {
    const Box B = box(i);
    const Box core = cubes_[i].box();
    const double margin = (dil_ - 1) * cubes_[i].side();
    const int d = cubes_[i].d;
    const Point step = B.extent() / m;
    double vol = 1;
    for (int a = 0; a < d; ++a) vol *= step(a);
    std::vector<int> idx(d, 0);
    while (true) {
      Point c = B.lo;
      for (int a = 0; a < d; ++a) c(a) += (idx[a] + 0.5) * step(a);
      double mult = 1;
      if (dil_ > 1) {
        bool deep = true;
        for (int a = 0; a < d; ++a) deep = deep && c(a) - core.lo(a) > margin && core.hi(a) - c(a) > margin;
        if (!deep) {
          int cnt = 0;
          const BoxTree& t = tree();
          t.query(Box{c, c}, [&](std::size_t j) { cnt += t.box(j).contains(c); });
          mult = std::max(1, cnt);
        }
      }
      out.push_back({c, vol / mult, levels_[i]});
      int a = 0;
      while (a < d && ++idx[a] == m) idx[a++] = 0;
      if (a == d) break;
    }
  }
  return out;
}

double DyadicCone::reach(const Point& c) const {
  double r = 0;
  for (std::size_t i = 0; i < cubes_.size(); ++i) r = std::max(r, farthest(box(i), c));
  return r;
}

json DyadicCone::to_json() const {
  return {{"variant", to_string(v_)}, {"apex", point_json(x_)},   {"base_k", Q0_.k},
          {"base_center", point_json(Q0_.center)}, {"k_stop", k_stop_}, {"cubes", cubes_.size()},
          {"dilation", dil_}};
}

// ---------------------------------------------------------------------------
// Fields

HarmonicField HarmonicField::constant(double c) {
  HarmonicField f;
  f.name = "constant";
  f.u = [c](const Point&) { return c; };
  f.grad = [](const Point& X) { return Point(Point::Zero(X.size())); };
  f.meta = {{"value", c}};
  return f;
}

HarmonicField HarmonicField::coordinate(int axis, int d) {
  if (axis < 0 || axis >= d) throw ArgumentError("coordinate axis out of range");
  HarmonicField f;
  f.name = "coordinate";
  f.u = [axis](const Point& X) { return X(axis); };
  f.grad = [axis](const Point& X) { return unit(static_cast<int>(X.size()), axis); };
  f.meta = {{"axis", axis}};
  return f;
}

ExitLayer::ExitLayer(const BoundaryModel& E, const ExitSample& s, const std::function<double(const Point&)>& w,
                     const ExitSmoothing& sm, const LayerOptions& opt) {
  const int d = E.ambient_dim(), n = d - 1;
  const double N = static_cast<double>(s.size());
  if (s.size() == 0) throw ArgumentError("empty exit sample");
  smoothed_ = dynamic_cast<const HyperplaneBoundary*>(&E) && sm.radius > 0 && sm.beta > 0 && d <= 3;
  std::vector<PanelSpec> specs;
  const double beta = sm.beta, hp = sm.panel > 0 ? sm.panel : sm.beta / 16;
  int m = 0;
  Point origin;
  std::vector<double> grid;
  if (smoothed_) {
    const double half = sm.radius + beta;
    m = static_cast<int>(std::ceil(2 * half / hp));
    if (static_cast<double>(m) > 4096) throw ArgumentError("smoothing zone too fine");
    origin = Point(sm.center.head(n).array() - half);
    grid.assign(static_cast<std::size_t>(std::pow(m, n)), 0.0);
  }
  std::vector<std::pair<std::size_t, double>> spread;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.escaped[i]) continue;
    const Point& z = s.exits[i];
    const double wz = w(z) / N;
    if (wz == 0.0) continue;
    bool near = smoothed_;
    for (int a = 0; near && a < n; ++a) near = std::abs(z(a) - sm.center(a)) <= sm.radius;
    if (!near) {
      specs.push_back({Box{z, z}, -1, wz});
      continue;
    }
    spread.clear();
    double tot = 0;
    std::array<int, 2> lo{0, 0}, hi{0, 0};
    for (int a = 0; a < n; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor((z(a) - beta - origin(a)) / hp)));
      hi[a] = std::min(m - 1, static_cast<int>(std::floor((z(a) + beta - origin(a)) / hp)));
    }
    for (int i0 = lo[0]; i0 <= hi[0]; ++i0)
      for (int i1 = (n > 1 ? lo[1] : 0); i1 <= (n > 1 ? hi[1] : 0); ++i1) {
        double r2 = std::pow(origin(0) + (i0 + 0.5) * hp - z(0), 2);
        if (n > 1) r2 += std::pow(origin(1) + (i1 + 0.5) * hp - z(1), 2);
        const double t = 1 - r2 / (beta * beta);
        if (t <= 0) continue;
        const double k = t * t;
        spread.push_back({static_cast<std::size_t>(i0) + static_cast<std::size_t>(i1) * m, k});
        tot += k;
      }
    if (tot == 0) {
      specs.push_back({Box{z, z}, -1, wz});
      continue;
    }
    for (auto [c, k] : spread) grid[c] += wz * k / tot;
  }
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (grid[c] == 0.0) continue;
    const int i0 = static_cast<int>(c % m), i1 = static_cast<int>(c / m);
    Box f{Point::Zero(d), Point::Zero(d)};
    f.lo(0) = origin(0) + i0 * hp;
    f.hi(0) = f.lo(0) + hp;
    if (n > 1) {
      f.lo(1) = origin(1) + i1 * hp;
      f.hi(1) = f.lo(1) + hp;
    }
    specs.push_back({f, d - 1, grid[c]});
  }
  S_ = std::make_unique<SingleLayer>(E, specs, opt);
}

namespace {

HarmonicField green_field_from(const BoundaryModel& E, std::shared_ptr<const ExitSample> s, int j,
                               const ExitSmoothing& sm) {
  const int d = E.ambient_dim();
  if (j < 0 || j >= d) throw ArgumentError("derivative axis out of range");
  auto L = std::make_shared<ExitLayer>(E, *s, [](const Point&) { return 1.0; }, sm);
  const Point P = s->X;
  FundamentalSolution G{d};
  HarmonicField f;
  f.name = "green-derivative";
  f.pole = P;
  f.u = [L, P, G, j](const Point& Y) { return G.gradient(Y - P)(j) - L->evaluate(Y, 1).gradient(j); };
  f.grad = [L, P, G, j](const Point& Y) {
    return Point((G.hessian(Y - P).row(j) - L->evaluate(Y, 2).hessian.row(j)).transpose());
  };
  f.low_confidence = s->escaped_fraction() > 0.01 || s->size() < 10000;
  f.meta = {{"pole", point_json(P)},        {"axis", j},
            {"walks", s->size()},           {"escaped", s->escaped_fraction()},
            {"smoothed", L->smoothed()},    {"beta", sm.beta},
            {"panels", L->panels()},        {"seed", s->seed}};
  return f;
}

}  // namespace

HarmonicField green_derivative_field(const BoundaryModel& E, const Point& P, int j, const WalkConfig& cfg,
                                     const ExitSmoothing& sm) {
  auto s = std::make_shared<const ExitSample>(sample_exits(E, P, cfg));
  return green_field_from(E, s, j, sm);
}

HarmonicField green_derivative_field(const BoundaryModel& E, std::shared_ptr<const ExitSample> s, int j,
                                     const ExitSmoothing& sm) {
  if (!s) throw ArgumentError("missing exit sample");
  return green_field_from(E, std::move(s), j, sm);
}

HarmonicityProbe check_harmonic(const HarmonicField& u, const std::vector<Point>& probes, double h, double tol) {
  HarmonicityProbe r;
  for (const Point& X : probes) {
    const int d = static_cast<int>(X.size());
    Hessian H(d, d);
    for (int i = 0; i < d; ++i) {
      const Point e = h * unit(d, i);
      H.col(i) = (u.grad(X + e) - u.grad(X - e)) / (2 * h);
    }
    const double floor = 1e-9 * u.grad(X).norm() / h + 1e-300;
    r.worst = std::max(r.worst, std::abs(H.trace()) / std::max(H.norm(), floor));
    ++r.probes;
  }
  r.pass = r.worst <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// Square and maximal functions

double square_function(const HarmonicField& u, const DyadicCone& cone, int sub, std::optional<int> k_trunc) {
  if (u.pole && cone.contains(*u.pole)) throw ArgumentError("pole of the field lies in the cone");
  const BoundaryModel& E = cone.context().g->boundary();
  const int n = E.dim();
  std::vector<double> t;
  for (const auto& c : cone.cells(sub)) {
    if (k_trunc && c.level > *k_trunc) continue;
    const double delta = E.project(c.X).distance;
    t.push_back(u.grad(c.X).squaredNorm() * std::pow(delta, 1 - n) * c.vol);
  }
  return std::sqrt(pairwise_sum(t));
}

double nt_max(const HarmonicField& u, const DyadicCone& cone, int sub, std::optional<int> k_trunc) {
  if (u.pole && cone.contains(*u.pole)) throw ArgumentError("pole of the field lies in the cone");
  double m = 0;
  for (const auto& c : cone.cells(sub)) {
    if (k_trunc && c.level > *k_trunc) continue;
    m = std::max(m, std::abs(u.u(c.X)));
  }
  return m;
}

double dyadic_max(const std::function<double(const Point&)>& f, const DyadicGrid& g, const CubeRef& Q0, const Point& x,
                  int k_stop, int nodes_per_side) {
  if (!in_cube(g, Q0, x)) throw ArgumentError("point outside the base cube");
  double best = 0;
  for (int k = Q0.k; k <= k_stop; ++k) {
    auto Q = g.ref_at(x, k);
    if (!Q) break;
    WeightedCloud c = cube_nodes(g, *Q, Q->side() / nodes_per_side);
    std::vector<double> fw(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) fw[i] = c.weights[i] * std::abs(f(c.points[i]));
    best = std::max(best, pairwise_sum(fw) / c.total_weight());
  }
  return best;
}

std::vector<ApexValues> cone_sweep(const HarmonicField& u, const ConeContext& ctx, const CubeRef& Q0,
                                   const ConeSweepOptions& opt) {
  if (opt.depth < 0 || opt.apexes < 1) throw ArgumentError("bad cone sweep options");
  const DyadicGrid& g = *ctx.g;
  const BoundaryModel& E = g.boundary();
  const int n = E.dim(), T = opt.depth + 1;
  WeightedCloud apex = cube_nodes(g, Q0, Q0.side() / opt.apexes);
  WqCache cache(ctx);
  CellIndex idx;
  std::vector<std::vector<CellRef>> sq(apex.size()), nt(apex.size());
  std::vector<char> need_u, need_g;
  auto take = [&](const DyadicCone& c, int sub, std::vector<CellRef>& out, bool grad) {
    if (u.pole && c.contains(*u.pole)) throw ArgumentError("pole of the field lies in the cone");
    for (const auto& cell : c.cells(sub)) {
      const std::size_t id = idx.add(cell.X);
      if (id >= need_u.size()) {
        need_u.resize(id + 1, 0);
        need_g.resize(id + 1, 0);
      }
      (grad ? need_g : need_u)[id] = 1;
      out.push_back({id, cell.vol, cell.level});
    }
  };
  for (std::size_t a = 0; a < apex.size(); ++a) {
    take(DyadicCone(ctx, Q0, apex.points[a], opt.square_cone, Q0.k + opt.depth, &cache), opt.sub_square, sq[a], true);
    take(DyadicCone(ctx, Q0, apex.points[a], opt.nt_cone, Q0.k + opt.depth, &cache), opt.sub_nt, nt[a], false);
  }
  const std::size_t M = idx.points.size();
  std::vector<double> g2(M, 0.0), uv(M, 0.0);
  parallel_for(
      M,
      [&](std::size_t i) {
        const Point& X = idx.points[i];
        if (need_g[i]) g2[i] = u.grad(X).squaredNorm() * std::pow(E.project(X).distance, 1 - n);
        if (need_u[i]) uv[i] = std::abs(u.u(X));
      },
      opt.workers);

  std::vector<ApexValues> out(apex.size());
  for (std::size_t a = 0; a < apex.size(); ++a) {
    ApexValues& r = out[a];
    r.x = apex.points[a];
    r.weight = apex.weights[a];
    r.S.assign(T, 0.0);
    r.N.assign(T, 0.0);
    std::vector<std::vector<double>> parts(T);
    for (const auto& c : sq[a]) parts[c.level - Q0.k].push_back(g2[c.id] * c.vol);
    double acc = 0;
    for (int t = 0; t < T; ++t) {
      acc += pairwise_sum(parts[t]);
      r.S[t] = std::sqrt(acc);
    }
    for (const auto& c : nt[a])
      for (int t = c.level - Q0.k; t < T; ++t) r.N[t] = std::max(r.N[t], uv[c.id]);
  }
  return out;
}

FunctionalReport good_lambda_experiment(const HarmonicField& u, const ConeContext& ctx, const CubeRef& Q0, double q,
                                        const ConeSweepOptions& opt, double stability) {
  if (!(q > 1)) throw ArgumentError("q must exceed 1");
  FunctionalReport rep;
  rep.id = "good-lambda";
  rep.tolerance = stability;
  {
    // harmonicity probe at a few cells of the first apex cone
    DyadicCone c(ctx, Q0, Q0.center, opt.square_cone, Q0.k, nullptr);
    std::vector<Point> probes;
    const auto& cubes = c.cubes();
    for (std::size_t i = 0; i < 6 && !cubes.empty(); ++i) probes.push_back(cubes[i * cubes.size() / 6].center());
    const double h = 1e-2 * (probes.empty() ? 1.0 : ctx.g->boundary().project(probes.front()).distance);
    auto hp = check_harmonic(u, probes, h, 1e-2);
    rep.extra["harmonicity"] = hp.worst;
    if (!hp.pass) throw ArgumentError("field failed the harmonicity probe");
  }
  auto apex = cone_sweep(u, ctx, Q0, opt);
  const int T = opt.depth + 1;
  std::vector<double> w;
  for (const auto& a : apex) w.push_back(a.weight);
  std::vector<double> C(T), Sn(T), Nn(T);
  for (int t = 0; t < T; ++t) {
    std::vector<double> s, m;
    for (const auto& a : apex) {
      s.push_back(a.S[t]);
      m.push_back(a.N[t]);
    }
    Sn[t] = lq_norm(w, s, q);
    Nn[t] = lq_norm(w, m, q);
    C[t] = Nn[t] > 0 ? Sn[t] / Nn[t] : (Sn[t] > 0 ? kInf : 0.0);
  }
  const double Cref = C.back();
  bool trivial = true, ok = std::isfinite(Cref);
  for (int t = 0; t < T; ++t) {
    SweepRow r;
    r.scale = std::ldexp(1.0, -(Q0.k + t));
    r.lhs = Sn[t];
    r.rhs = Nn[t];
    r.constant = C[t];
    r.pass = std::isfinite(C[t]) && (Cref == 0 ? C[t] == 0 : std::abs(C[t] / Cref - 1) <= stability);
    trivial = trivial && Sn[t] == 0;
    ok = ok && r.pass;
    rep.sweep.push_back(r);
  }
  rep.lhs = Sn.back();
  rep.rhs = Nn.back();
  rep.constant = *std::max_element(C.begin(), C.end());
  rep.pass = ok;
  if (trivial) rep.flag("trivial: zero square function");
  if (u.low_confidence) rep.flag("monte-carlo low confidence");
  const auto [nlo, nhi] = std::minmax_element(Nn.begin(), Nn.end());
  rep.extra["nt_truncation_spread"] = *nlo > 0 ? *nhi / *nlo : 1.0;
  rep.extra["apexes"] = apex.size();
  rep.extra["q"] = q;
  rep.extra["field"] = u.meta;
  return rep;
}

// ---------------------------------------------------------------------------
// Tb

double TbGeometry::eta(const Point& y) const {
  const double R = B_hat.radius;
  return 1 - smoothstep5(((y - x_Q).norm() - 4 * R) / R);
}

json TbGeometry::to_json() const {
  return {{"k", Q.k},           {"x_Q", point_json(x_Q)}, {"ell", ell},
          {"sigma", sigma},     {"kappa0", kappa0},       {"kappa1", kappa1},
          {"c", c},             {"kappa2", kappa2},       {"B_tilde_radius", B_tilde.radius},
          {"B_hat_radius", B_hat.radius}, {"X_hat", point_json(X_hat)}, {"pole_outside", pole_outside}};
}

TbGeometry tb_geometry(const ConeContext& ctx, const CubeRef& Q) {
  const DyadicGrid& g = *ctx.g;
  const BoundaryModel& E = g.boundary();
  TbGeometry G;
  G.Q = Q;
  G.x_Q = Q.center;
  G.ell = Q.side();
  G.sigma = cube_sigma(g, Q);
  std::vector<CubeRef> fam{Q};
  for (const auto& c : g.children(Q)) fam.push_back(c);
  double k0 = 0, k1 = cube_outer_radius(g, Q) / G.ell;
  const double lam = ctx.region.lambda;
  for (const auto& P : fam) {
    for (const auto& I : w_q(g, *ctx.W, P, ctx.region.wq)) {
      k0 = std::max(k0, farthest(fatten(I, 2 * lam), G.x_Q) / G.ell);
      k1 = std::max(k1, farthest(I.box(), G.x_Q) / G.ell);
    }
    if (ctx.Wext)
      for (const auto& I : w_q(g, *ctx.Wext, P, ctx.region.wq)) k1 = std::max(k1, farthest(I.box(), G.x_Q) / G.ell);
  }
  G.kappa0 = k0;
  G.kappa1 = std::max(k0, k1) * (1 + 1e-9);
  G.B_tilde = {G.x_Q, G.kappa1 * G.ell};
  auto ck = corkscrew(E, G.x_Q, G.B_tilde.radius);
  G.c = ck.c;
  if (!(G.c > 0)) throw PreconditionError("no corkscrew ball at the scale of B-tilde");
  G.kappa2 = 6 / G.c;
  G.B_hat = {G.x_Q, G.kappa2 * G.B_tilde.radius};
  G.X_hat = corkscrew(E, G.x_Q, G.B_hat.radius).X;
  G.pole_outside = (G.X_hat - G.x_Q).norm() >= 6 * G.B_tilde.radius * (1 - 1e-12);
  return G;
}

json TbReport::to_json() const {
  return {{"geometry", geo.to_json()}, {"q", q},   {"a", a},         {"b", b},
          {"b_stderr", b_se},          {"c", c},   {"A0", A0},       {"ext_C", ext_C},
          {"ext_samples", ext_samples}, {"ext_pass", ext_pass}, {"flags", flags}};
}

FunctionalReport TbReport::report() const {
  FunctionalReport r;
  r.id = "tb";
  r.lhs = A0;
  r.rhs = 0;
  r.constant = A0;
  r.std_err = (b > 0 && A0 == 1 / b) ? b_se / (b * b) : 0.0;
  r.pass = std::isfinite(A0) && ext_pass;
  r.flags = flags;
  r.extra = to_json();
  return r;
}

TbReport tb_conditions(const ConeContext& ctx, const CubeRef& Q, const TbOptions& opt) {
  if (!(opt.q > 1)) throw ArgumentError("q must exceed 1");
  const DyadicGrid& g = *ctx.g;
  const BoundaryModel& E = g.boundary();
  const int d = E.ambient_dim(), n = E.dim();
  TbReport rep;
  rep.q = opt.q;
  rep.geo = tb_geometry(ctx, Q);
  const TbGeometry& G = rep.geo;
  if (!G.pole_outside) rep.flags.push_back("pole inside 6 B-tilde");
  WalkConfig cfg = opt.walks;
  if (opt.workers) cfg.workers = opt.workers;
  const ExitSample s = sample_exits(E, G.X_hat, cfg);
  if (s.escaped_fraction() > 0.01) rep.flags.push_back("escaped walks above 1%");
  const double Nw = static_cast<double>(s.size());

  // (b)
  WalkConfig cb = cfg;
  if (opt.count_walks) cb.walks = opt.count_walks;
  auto bm = count_exits(E, G.X_hat, [&](const Point& y) { return in_cube(g, Q, y); }, cb);
  rep.b = bm.mean;
  rep.b_se = bm.std_err;
  if (bm.mean * static_cast<double>(bm.walks) < 30) rep.flags.push_back("fewer than 30 walks hit Q");

  // (a)
  const double R5 = 5 * G.B_hat.radius;
  SurfacePartition part(E, G.x_Q, R5, opt.cell_fraction * G.B_hat.radius);
  auto om = part.masses(s);
  std::vector<double> ta;
  for (std::size_t c = 0; c < part.size(); ++c) {
    double w = om[c];
    double wq = std::pow(w, opt.q);
    if (opt.q == 2) wq = w * w - w * (1 - w) / (Nw - 1);
    ta.push_back(std::pow(G.eta(part.centroid(c)), opt.q) * wq * std::pow(part.sigma(c), 1 - opt.q));
  }
  rep.a = std::pow(G.sigma, opt.q - 1) * pairwise_sum(ta);

  // (c)
  const double beta = opt.beta_fraction * E.project(G.X_hat).distance;
  ExitSmoothing sm{G.x_Q, std::max(2 * beta, 2 * G.B_tilde.radius), beta, beta / 16};
  ExitLayer Lin(E, s, [&](const Point& y) { return G.eta(y); }, sm);
  ExitLayer Lout(E, s, [&](const Point& y) { return G.eta(y) - 1; });
  FundamentalSolution Phi{d};
  auto hess = [&](const Point& X) -> Hessian {
    if (E.in_domain(X)) return G.sigma * Lin.evaluate(X, 2).hessian;
    return G.sigma * (Phi.hessian(X - G.X_hat) + Lout.evaluate(X, 2).hessian);
  };
  WeightedCloud apex = cube_nodes(g, Q, Q.side() / opt.apexes);
  WqCache cache(ctx);
  CellIndex idx;
  std::vector<std::vector<CellRef>> cells(apex.size());
  double min_delta = kInf;
  for (std::size_t a = 0; a < apex.size(); ++a) {
    DyadicCone cone(ctx, Q, apex.points[a], ConeVariant::LambdaTwoSided, Q.k + opt.depth, &cache);
    for (const auto& c : cone.cells(opt.sub)) cells[a].push_back({idx.add(c.X), c.vol, c.level});
  }
  std::vector<double> val(idx.points.size());
  std::vector<double> dl(idx.points.size());
  parallel_for(
      idx.points.size(),
      [&](std::size_t i) {
        const Point& X = idx.points[i];
        dl[i] = E.project(X).distance;
        val[i] = hess(X).squaredNorm() * std::pow(dl[i], 1 - n);
      },
      opt.workers);
  for (double x : dl) min_delta = std::min(min_delta, x);
  if (min_delta < sm.panel) rep.flags.push_back("cone cells below the smoothing panel scale");
  std::vector<double> tc;
  for (std::size_t a = 0; a < apex.size(); ++a) {
    std::vector<double> t;
    for (const auto& c : cells[a]) t.push_back(val[c.id] * c.vol);
    tc.push_back(apex.weights[a] * std::pow(pairwise_sum(t), opt.q / 2));
  }
  rep.c = pairwise_sum(tc) / G.sigma;
  rep.A0 = std::max({rep.a, rep.b > 0 ? 1 / rep.b : kInf, rep.c});

  // exterior Hessian bound on B_hat
  Rng rng(derive_seed(cfg.seed, 0, 0x7b));
  std::vector<Point> ext;
  for (std::size_t tries = 0; ext.size() < opt.exterior_samples && tries < 100 * opt.exterior_samples; ++tries) {
    Point X = G.x_Q + G.B_hat.radius * rng.in_ball(d);
    if (!E.in_domain(X) && E.project(X).distance > 0) ext.push_back(X);
  }
  std::vector<double> hn(ext.size());
  parallel_for(ext.size(), [&](std::size_t i) { hn[i] = hess(ext[i]).norm() * G.ell; }, opt.workers);
  rep.ext_samples = ext.size();
  rep.ext_C = hn.empty() ? 0.0 : *std::max_element(hn.begin(), hn.end());
  rep.ext_pass = !ext.empty() && rep.ext_C <= opt.hessian_C;
  if (ext.empty()) rep.flags.push_back("no exterior samples in B-hat");
  return rep;
}

FunctionalReport nt_green_bound(const ConeContext& ctx, const CubeRef& Q, double q, const NtGreenOptions& opt) {
  if (!(q > 1)) throw ArgumentError("q must exceed 1");
  const DyadicGrid& g = *ctx.g;
  const BoundaryModel& E = g.boundary();
  const int d = E.ambient_dim(), n = E.dim();
  TbGeometry G = tb_geometry(ctx, Q);
  WalkConfig cfg = opt.walks;
  if (opt.workers) cfg.workers = opt.workers;
  auto s = std::make_shared<const ExitSample>(sample_exits(E, G.X_hat, cfg));
  const double beta = opt.beta_fraction * E.project(G.X_hat).distance;
  ExitSmoothing sm{G.x_Q, std::max(2 * beta, 2 * G.B_tilde.radius), beta, beta / 16};
  HarmonicField u = green_field_from(E, s, d - 1, sm);
  ConeSweepOptions co;
  co.depth = opt.depth;
  co.apexes = opt.apexes;
  co.sub_square = 0;
  co.sub_nt = opt.sub;
  co.workers = opt.workers;
  // the square cone is not needed here; Lambda keeps it cheap
  co.square_cone = ConeVariant::Lambda;
  co.depth = opt.depth;
  auto apex = cone_sweep(HarmonicField{u.name, u.u, [](const Point& X) { return Point(Point::Zero(X.size())); },
                                       u.pole, u.low_confidence, u.meta},
                         ctx, Q, co);
  std::vector<double> t;
  for (const auto& a : apex) t.push_back(a.weight * std::pow(a.N.back(), q));
  FunctionalReport rep;
  rep.id = "nt-green";
  rep.lhs = pairwise_sum(t) * std::pow(G.sigma, q - 1);
  rep.constant = rep.lhs;
  rep.pass = std::isfinite(rep.lhs);
  if (u.low_confidence) rep.flag("monte-carlo low confidence");

  // |u(Y)| against omega(Delta_Y) / delta(Y)^n at cone points
  DyadicCone cone(ctx, Q, Q.center, ConeVariant::GammaTilde, Q.k + opt.depth);
  const auto& cubes = cone.cubes();
  double lo = kInf, hi = 0;
  json spots = json::array();
  for (int i = 0; i < opt.spot_checks && !cubes.empty(); ++i) {
    const Point Y = cubes[static_cast<std::size_t>(i) * cubes.size() / opt.spot_checks].center();
    const auto pr = E.project(Y);
    const auto w = measure_of(*s, SurfaceBall{pr.foot, pr.distance});
    const double ratio = w.mean > 0 ? std::abs(u.u(Y)) * std::pow(pr.distance, n) / w.mean : kInf;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    spots.push_back(json{{"Y", point_json(Y)}, {"ratio", ratio}, {"omega", w.mean}, {"omega_stderr", w.std_err}});
  }
  rep.extra = {{"geometry", G.to_json()}, {"q", q},     {"spot_lo", lo},
               {"spot_hi", hi},           {"spots", spots}, {"field", u.meta}};
  return rep;
}

// ---------------------------------------------------------------------------
// Partitions, reverse Hoelder, A-infinity

WeightedCloud local_samples(const BoundaryModel& E, const Point& x, double r, double h, std::uint64_t seed) {
  const int d = E.ambient_dim(), n = d - 1;
  WeightedCloud raw;
  if (auto* hp = dynamic_cast<const HyperplaneBoundary*>(&E)) {
    Point lo = Point(x.head(n).array() - r), hi = Point(x.head(n).array() + r);
    if (hp->has_patch()) {
      lo = lo.cwiseMax(hp->base_box().lo);
      hi = hi.cwiseMin(hp->base_box().hi);
      for (int i = 0; i < n; ++i)
        if (!(hi(i) > lo(i))) return {};
    }
    std::vector<int> cnt(n);
    Point step(n);
    double w = 1;
    for (int i = 0; i < n; ++i) {
      cnt[i] = std::max(1, static_cast<int>(std::lround((hi(i) - lo(i)) / h)));
      step(i) = (hi(i) - lo(i)) / cnt[i];
      w *= step(i);
    }
    raw.spacing = step.maxCoeff();
    std::vector<int> idx(n, 0);
    while (true) {
      Point p = Point::Zero(d);
      for (int i = 0; i < n; ++i) p(i) = lo(i) + (idx[i] + 0.5) * step(i);
      raw.points.push_back(p);
      raw.weights.push_back(w);
      int k = 0;
      while (k < n && ++idx[k] == cnt[k]) idx[k++] = 0;
      if (k == n) break;
    }
  } else if (auto* pb = dynamic_cast<const PolyhedralBoundary*>(&E)) {
    std::vector<Box> f;
    for (const auto& b : pb->faces())
      if (b.distance(x) < r) f.push_back(b);
    if (f.empty()) return {};
    raw = PolyhedralBoundary(d, f).sample(h, seed);
  } else {
    raw = E.sample(h, seed);
  }
  WeightedCloud out;
  out.spacing = raw.spacing;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if ((raw.points[i] - x).norm() < r) {
      out.points.push_back(raw.points[i]);
      out.weights.push_back(raw.weights[i]);
    }
  return out;
}

SurfacePartition::SurfacePartition(const BoundaryModel& E, const Point& center, double radius, double h,
                                   std::function<bool(const Point&)> inside)
    : center_(center), radius_(radius), h_(h), inside_(std::move(inside)) {
  if (!(h > 0) || !(radius > 0)) throw ArgumentError("partition needs positive radius and cell size");
  if (!inside_) inside_ = [c = center, r = radius](const Point& y) { return (y - c).norm() < r; };
  WeightedCloud smp = local_samples(E, center, radius, h / 4);
  std::map<std::array<long long, 4>, long> key;
  WeightedCloud kept;
  kept.spacing = 0;
  for (std::size_t i = 0; i < smp.size(); ++i) {
    const Point& p = smp.points[i];
    if (!inside_(p)) continue;
    std::array<long long, 4> k{};
    for (int a = 0; a < p.size(); ++a) k[a] = static_cast<long long>(std::floor((p(a) - center(a)) / h));
    auto [it, fresh] = key.try_emplace(k, static_cast<long>(sigma_.size()));
    if (fresh) {
      sigma_.push_back(0);
      centroid_.push_back(Point::Zero(p.size()));
    }
    sigma_[it->second] += smp.weights[i];
    centroid_[it->second] += smp.weights[i] * p;
    pts_.push_back(p);
    pt_cell_.push_back(it->second);
    kept.points.push_back(p);
    kept.weights.push_back(smp.weights[i]);
  }
  if (sigma_.empty()) throw ArgumentError("partition region holds no boundary samples");
  for (std::size_t c = 0; c < sigma_.size(); ++c) centroid_[c] /= sigma_[c];
  total_ = pairwise_sum(sigma_);
  index_ = std::make_unique<PointCloudBoundary>(std::move(kept));
}

long SurfacePartition::cell_of(const Point& y) const {
  if (!inside_(y)) return -1;
  return pt_cell_[index_->nearest_index(y)];
}

std::vector<double> SurfacePartition::masses(const ExitSample& s) const {
  std::vector<long> c(s.size(), -1);
  parallel_for(s.size(), [&](std::size_t i) {
    if (!s.escaped[i]) c[i] = cell_of(s.exits[i]);
  });
  std::vector<double> m(size(), 0.0);
  for (long k : c)
    if (k >= 0) m[static_cast<std::size_t>(k)] += 1;
  for (double& x : m) x /= static_cast<double>(s.size());
  return m;
}

namespace {

struct RhValue {
  double integral = 0;  // sum omega^p sigma^{1-p}
  double se = 0;
  double omega = 0;
  std::size_t sparse = 0;
};

RhValue rh_integral(const SurfacePartition& P, const std::vector<double>& om, double p, std::size_t N) {
  RhValue r;
  std::vector<double> t, g1, g2;
  const double Nd = static_cast<double>(N);
  for (std::size_t c = 0; c < P.size(); ++c) {
    const double w = om[c], s = P.sigma(c);
    double wp = std::pow(w, p);
    if (p == 2) wp = w * w - w * (1 - w) / (Nd - 1);
    t.push_back(wp * std::pow(s, 1 - p));
    const double g = p * std::pow(w / s, p - 1);
    g1.push_back(w * g);
    g2.push_back(w * g * g);
    r.omega += w;
    if (w * Nd < 5) ++r.sparse;
  }
  r.integral = pairwise_sum(t);
  const double m1 = pairwise_sum(g1), m2 = pairwise_sum(g2);
  r.se = std::sqrt(std::max(0.0, m2 - m1 * m1) / Nd);
  return r;
}

}  // namespace

FunctionalReport rh_check(const BoundaryModel& E, const SurfaceBall& D, double p, const RhOptions& opt) {
  if (!(p > 1) || !std::isfinite(p)) throw ArgumentError("p must satisfy 1 < p < infinity");
  const Point X = opt.pole ? *opt.pole : corkscrew(E, D.center, D.radius).X;
  ExitSample s = sample_exits(E, X, opt.walks);
  SurfacePartition P(E, D.center, D.radius, opt.cell_fraction * D.radius);
  auto om = P.masses(s);
  RhValue v = rh_integral(P, om, p, s.size());
  const double sD = E.measure_in_ball(D.center, D.radius);
  const double norm = std::pow(sD, p - 1);
  FunctionalReport rep;
  rep.id = "rh";
  rep.lhs = v.integral * norm;
  rep.std_err = v.se * norm;
  rep.rhs = std::pow(v.omega, p);
  rep.constant = rep.rhs > 0 ? rep.lhs / rep.rhs : kInf;
  rep.pass = std::isfinite(rep.lhs);
  if (s.escaped_fraction() > 0.01) rep.flag("escaped walks above 1%");
  if (v.sparse * 2 > P.size()) rep.flag("most cells hold fewer than 5 exits");
  rep.extra = {{"pole", point_json(X)},       {"p", p},         {"r", D.radius},
               {"sigma", sD},                 {"sigma_cells", P.total()},
               {"omega", v.omega},            {"cells", P.size()},
               {"walks", s.size()},           {"escaped", s.escaped_fraction()}};
  return rep;
}

FunctionalReport rh_sweep(const BoundaryModel& E, const SurfaceBall& D0, double p, const std::vector<double>& radii,
                          int centres, const RhOptions& opt) {
  if (!(p > 1) || !std::isfinite(p)) throw ArgumentError("p must satisfy 1 < p < infinity");
  const Point X = opt.pole ? *opt.pole : corkscrew(E, D0.center, D0.radius).X;
  ExitSample s = sample_exits(E, X, opt.walks);
  FunctionalReport rep;
  rep.id = "rh-sweep";
  for (double r : radii) {
    if (!(r > 0) || r >= D0.radius) throw ArgumentError("sweep radius must lie in (0, r0)");
    WeightedCloud cand = local_samples(E, D0.center, D0.radius - r, (D0.radius - r) / 8 + 1e-12 * D0.radius);
    if (cand.size() == 0) cand.points.push_back(D0.center);
    for (int i = 0; i < centres; ++i) {
      const Point& y = cand.points[static_cast<std::size_t>(i) * cand.size() / centres];
      SurfacePartition P(E, y, r, opt.cell_fraction * r);
      auto om = P.masses(s);
      RhValue v = rh_integral(P, om, p, s.size());
      const double sD = E.measure_in_ball(y, r);
      SweepRow row;
      row.scale = r;
      row.lhs = std::pow(std::max(0.0, v.integral) / sD, 1 / p);
      row.rhs = v.omega / sD;
      row.constant = row.rhs > 0 ? row.lhs / row.rhs : kInf;
      rep.sweep.push_back(row);
    }
  }
  rep.constant = 0;
  for (const auto& r : rep.sweep) rep.constant = std::max(rep.constant, r.constant);
  rep.lhs = rep.constant;
  rep.pass = std::isfinite(rep.constant);
  rep.extra = {{"pole", point_json(X)}, {"p", p}, {"r0", D0.radius}, {"walks", s.size()}};
  return rep;
}

AinftyFit ainfty_fit(const std::vector<double>& sigma, const std::vector<double>& omega, std::size_t sets,
                     std::uint64_t seed) {
  if (sigma.size() != omega.size() || sigma.empty()) throw ArgumentError("cell vectors mismatch");
  const double Ss = pairwise_sum(sigma), So = pairwise_sum(omega);
  if (!(So > 0) || !(Ss > 0)) throw ArgumentError("region carries no measure");
  AinftyFit fit;
  Rng rng(derive_seed(seed, 0, 0xa1f));
  const std::size_t M = sigma.size();
  for (std::size_t k = 0; k < sets; ++k) {
    std::vector<double> fs, fo;
    if (k % 2 == 0) {
      const double f = std::pow(10.0, -3 * rng.uniform());
      for (std::size_t c = 0; c < M; ++c)
        if (rng.uniform() < f) {
          fs.push_back(sigma[c]);
          fo.push_back(omega[c]);
        }
    } else {
      const std::size_t len = 1 + static_cast<std::size_t>(rng.uniform() * rng.uniform() * static_cast<double>(M));
      const std::size_t start = static_cast<std::size_t>(rng.uniform() * static_cast<double>(M));
      for (std::size_t j = 0; j < std::min(len, M); ++j) {
        fs.push_back(sigma[(start + j) % M]);
        fo.push_back(omega[(start + j) % M]);
      }
    }
    const double s = pairwise_sum(fs) / Ss, w = pairwise_sum(fo) / So;
    if (s > 0) fit.pairs.push_back({s, w});
  }
  fit.sets = fit.pairs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (auto [s, w] : fit.pairs)
    if (w > 0 && s < 1) {
      const double x = std::log(s), y = std::log(w);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      m += 1;
    }
  const double var = sxx - sx * sx / std::max(m, 1.0);
  fit.theta = m > 1 && var > 0 ? (sxy - sx * sy / m) / var : 1.0;
  fit.C = 0;
  for (auto [s, w] : fit.pairs) fit.C = std::max(fit.C, w / std::pow(s, fit.theta));
  return fit;
}

namespace {

FunctionalReport ainfty_report(const std::string& id, const SurfacePartition& P, const ExitSample& s,
                               const AinftyOptions& opt) {
  auto om = P.masses(s);
  std::vector<double> sg(P.size());
  for (std::size_t c = 0; c < P.size(); ++c) sg[c] = P.sigma(c);
  AinftyFit f = ainfty_fit(sg, om, opt.sets, opt.walks.seed);
  FunctionalReport rep;
  rep.id = id;
  rep.lhs = f.theta;
  rep.constant = f.C;
  rep.pass = std::isfinite(f.C) && f.theta > 0;
  if (s.escaped_fraction() > 0.01) rep.flag("escaped walks above 1%");
  rep.extra = {{"theta", f.theta}, {"C", f.C}, {"sets", f.sets}, {"cells", P.size()}, {"walks", s.size()}};
  return rep;
}

}  // namespace

FunctionalReport ainfty_check(const BoundaryModel& E, const SurfaceBall& D, const AinftyOptions& opt) {
  const Point X = corkscrew(E, D.center, D.radius).X;
  ExitSample s = sample_exits(E, X, opt.walks);
  SurfacePartition P(E, D.center, D.radius, opt.cell_fraction * D.radius);
  auto rep = ainfty_report("ainfty", P, s, opt);
  rep.extra["pole"] = point_json(X);
  return rep;
}

FunctionalReport ainfty_check(const ConeContext& ctx, const CubeRef& Q, const AinftyOptions& opt) {
  const DyadicGrid& g = *ctx.g;
  const BoundaryModel& E = g.boundary();
  const Point X = cube_corkscrew(g, *ctx.W, Q, ctx.region.wq).X;
  ExitSample s = sample_exits(E, X, opt.walks);
  SurfacePartition P(E, Q.center, cube_outer_radius(g, Q) * (1 + 1e-9), opt.cell_fraction * Q.side(),
                     [&g, Q](const Point& y) { return in_cube(g, Q, y); });
  auto rep = ainfty_report("ainfty-dyadic", P, s, opt);
  rep.extra["pole"] = point_json(X);
  return rep;
}

}  // namespace rectilab
