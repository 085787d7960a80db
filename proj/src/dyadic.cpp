#include "rectilab/dyadic.hpp"

#include "rectilab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace rectilab {

namespace {

// Uniform hash grid over points. Bucket collisions only add candidates.
class HashGrid {
 public:
  explicit HashGrid(double cell) : cell_(cell) {}

  void insert(const Point& p, int idx) {
    pts_.push_back(p);
    ids_.push_back(idx);
    buckets_[key(p, 0)].push_back(static_cast<int>(pts_.size()) - 1);
  }

  template <typename F>
  void around(const Point& q, int rings, F&& f) const {
    const int d = static_cast<int>(q.size());
    std::vector<long long> base(d);
    for (int i = 0; i < d; ++i) base[i] = static_cast<long long>(std::floor(q(i) / cell_));
    std::vector<int> off(d, -rings);
    while (true) {
      std::uint64_t h = 0;
      for (int i = 0; i < d; ++i) h = splitmix64(h ^ static_cast<std::uint64_t>(base[i] + off[i] + 0x100000));
      auto it = buckets_.find(h);
      if (it != buckets_.end())
        for (int j : it->second) f(pts_[j], ids_[j]);
      int i = 0;
      while (i < d && ++off[i] > rings) off[i++] = -rings;
      if (i == d) break;
    }
  }

  std::size_t size() const { return pts_.size(); }
  const Point& point(std::size_t j) const { return pts_[j]; }
  int id(std::size_t j) const { return ids_[j]; }

 private:
  std::uint64_t key(const Point& p, int) const {
    std::uint64_t h = 0;
    for (int i = 0; i < p.size(); ++i)
      h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<long long>(std::floor(p(i) / cell_)) + 0x100000));
    return h;
  }

  double cell_;
  std::vector<Point> pts_;
  std::vector<int> ids_;
  std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
};

// Nearest net point to q; ties to the lexicographically smaller point.
int nearest_in(const HashGrid& net, const Point& q) {
  int best = -1;
  double bd = kInf;
  Point bp;
  auto visit = [&](const Point& p, int id) {
    double dd = (p - q).squaredNorm();
    if (dd < bd || (dd == bd && lex_less(p, bp))) {
      bd = dd;
      best = id;
      bp = p;
    }
  };
  for (int rings = 1; rings <= 3 && best < 0; ++rings) net.around(q, rings, visit);
  if (best < 0)
    for (std::size_t j = 0; j < net.size(); ++j) visit(net.point(j), net.id(j));
  return best;
}

bool aligned(double x, double s) {
  double q = x / s;
  return std::abs(q - std::round(q)) < 1e-9;
}

const HyperplaneBoundary* as_flat(const BoundaryModel& E) {
  if (auto h = dynamic_cast<const HyperplaneBoundary*>(&E)) return h;
  if (auto c = dynamic_cast<const PointCloudBoundary*>(&E))
    if (c->parent()) return dynamic_cast<const HyperplaneBoundary*>(c->parent().get());
  return nullptr;
}

}  // namespace

DyadicGrid::DyadicGrid(BoundaryPtr E, int k_min, int k_max, const GridOptions& opt)
    : E_(std::move(E)), k_min_(k_min), k_max_(k_max) {
  if (!E_) throw ArgumentError("grid needs a boundary");
  if (k_max < k_min) throw ArgumentError("grid levels: k_max < k_min");
  if (k_max - k_min > 14) throw ArgumentError("grid levels: too many generations");
  const int n = E_->dim();

  // ADR precondition at the requested scales.
  {
    WeightedCloud probe = E_->sample(std::min(E_->window().diameter(), E_->diameter()) / 8.0, opt.seed);
    std::vector<Point> centers;
    std::size_t stride = std::max<std::size_t>(1, probe.size() / 8);
    for (std::size_t i = 0; i < probe.size(); i += stride) centers.push_back(E_->project(probe.points[i]).foot);
    for (int k = k_min; k <= k_max; ++k) {
      double r = std::ldexp(1.0, -k);
      if (r > E_->diameter()) continue;
      auto rep = adr_check(*E_, centers, {r}, opt.adr_constant);
      if (!rep.violations.empty()) throw ConstructionError("ADR fails at scale 2^-" + std::to_string(k), r);
    }
  }

  levels_.assign(k_max - k_min + 1, {});
  const HyperplaneBoundary* flatE = dynamic_cast<const HyperplaneBoundary*>(E_.get());
  Box base;
  if (const HyperplaneBoundary* f = as_flat(*E_)) {
    base = f->base_box();
    if (opt.window) base = Box{opt.window->lo.head(n), opt.window->hi.head(n)};
  }
  if (flatE) {
    build_flat(base);
    return;
  }
  spacing_ = std::ldexp(opt.spacing_fraction, -k_max);
  WeightedCloud cloud;
  if (auto pc = dynamic_cast<const PointCloudBoundary*>(E_.get())) {
    cloud = pc->cloud();
    spacing_ = cloud.spacing;
  } else {
    cloud = E_->sample(spacing_, opt.seed);
    spacing_ = cloud.spacing;
  }
  if (opt.window) {
    WeightedCloud kept;
    kept.spacing = cloud.spacing;
    for (std::size_t i = 0; i < cloud.size(); ++i)
      if (opt.window->contains(cloud.points[i])) {
        kept.points.push_back(cloud.points[i]);
        kept.weights.push_back(cloud.weights[i]);
      }
    cloud = std::move(kept);
  }
  if (cloud.size() == 0) throw ConstructionError("no boundary samples inside the grid window", std::ldexp(1.0, -k_min));
  window_ = opt.window ? *opt.window : E_->window();
  build_sampled(cloud, base, as_flat(*E_) != nullptr);
}

void DyadicGrid::build_flat(const Box& base) {
  const int n = E_->dim(), d = E_->ambient_dim();
  const double s0 = std::ldexp(1.0, -k_min_);
  for (int i = 0; i < n; ++i)
    if (!aligned(base.lo(i), s0) || !aligned(base.hi(i) - base.lo(i), s0))
      throw ArgumentError("flat grid window is not aligned to the coarsest dyadic side");
  flat_ = true;
  base_ = base;
  Point wlo = Point::Zero(d), whi = Point::Zero(d);
  wlo.head(n) = base.lo;
  whi.head(n) = base.hi;
  window_ = {wlo, whi};
  const bool unbounded = !E_->bounded();

  for (int k = k_min_; k <= k_max_; ++k) {
    const double s = std::ldexp(1.0, -k);
    std::vector<long long> m(n);
    long long total = 1;
    for (int i = 0; i < n; ++i) {
      m[i] = std::llround((base.hi(i) - base.lo(i)) / s);
      total *= m[i];
    }
    if (cubes_.size() + static_cast<std::size_t>(total) > 5'000'000)
      throw ArgumentError("flat grid would exceed 5e6 cubes");
    std::vector<long long> idx(n, 0);
    for (long long c = 0; c < total; ++c) {
      DyadicCube q;
      q.id = static_cast<int>(cubes_.size());
      q.k = k;
      Point lo = Point::Zero(d), hi = Point::Zero(d);
      for (int i = 0; i < n; ++i) {
        lo(i) = base.lo(i) + idx[i] * s;
        hi(i) = lo(i) + s;
      }
      q.region = {lo, hi};
      q.center = q.region.center();
      q.r = 0.5 * s;
      q.outer = 0.5 * s * std::sqrt(static_cast<double>(n));
      q.sigma = std::pow(s, n);
      if (unbounded)
        for (int i = 0; i < n; ++i)
          if (idx[i] == 0 || idx[i] == m[i] - 1) q.rim = true;
      if (k > k_min_) {
        // Parent by halving the integer coordinates.
        const auto& prev = levels_[k - 1 - k_min_];
        long long pid = 0, stride = 1;
        for (int i = 0; i < n; ++i) {
          pid += (idx[i] / 2) * stride;
          stride *= m[i] / 2;
        }
        q.parent = prev[static_cast<std::size_t>(pid)];
        cubes_[q.parent].children.push_back(q.id);
      }
      levels_[k - k_min_].push_back(q.id);
      cubes_.push_back(std::move(q));
      int i = 0;
      while (i < n && ++idx[i] == m[i]) idx[i++] = 0;
    }
  }
}

void DyadicGrid::build_sampled(const WeightedCloud& cloud, const Box& lattice_base, bool lattice) {
  const int n = E_->dim(), d = E_->ambient_dim();
  const int L = k_max_ - k_min_ + 1;
  std::vector<std::vector<Point>> nets(L);
  std::vector<HashGrid> grids;
  grids.reserve(L);

  for (int l = 0; l < L; ++l) {
    const double s = std::ldexp(1.0, -(k_min_ + l));
    grids.emplace_back(s);
    HashGrid& g = grids.back();
    if (lattice) {
      // Flat pieces: the nets are the dyadic square centres.
      std::vector<long long> m(n);
      long long total = 1;
      for (int i = 0; i < n; ++i) {
        m[i] = std::max(1LL, std::llround((lattice_base.hi(i) - lattice_base.lo(i)) / s));
        total *= m[i];
      }
      std::vector<long long> idx(n, 0);
      for (long long c = 0; c < total; ++c) {
        Point p = Point::Zero(d);
        for (int i = 0; i < n; ++i) p(i) = lattice_base.lo(i) + (idx[i] + 0.5) * s;
        g.insert(p, static_cast<int>(nets[l].size()));
        nets[l].push_back(p);
        int i = 0;
        while (i < n && ++idx[i] == m[i]) idx[i++] = 0;
      }
      continue;
    }
    if (l > 0)
      for (const Point& p : nets[l - 1]) {
        g.insert(p, static_cast<int>(nets[l].size()));
        nets[l].push_back(p);
      }
    for (const Point& p : cloud.points) {
      bool close = false;
      g.around(p, 1, [&](const Point& q, int) {
        if (!close && (q - p).norm() < s) close = true;
      });
      if (!close) {
        g.insert(p, static_cast<int>(nets[l].size()));
        nets[l].push_back(p);
      }
    }
  }

  // Parent links between consecutive nets and leaf assignment of samples.
  std::vector<std::vector<int>> up(L);
  for (int l = 1; l < L; ++l) {
    up[l].resize(nets[l].size());
    for (std::size_t j = 0; j < nets[l].size(); ++j) up[l][j] = nearest_in(grids[l - 1], nets[l][j]);
  }
  std::vector<int> leaf(cloud.size());
  std::vector<std::size_t> count(nets[L - 1].size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    leaf[i] = nearest_in(grids[L - 1], cloud.points[i]);
    ++count[leaf[i]];
  }

  // Member counts up the tree; empty net points are dropped.
  std::vector<std::vector<std::size_t>> cnt(L);
  cnt[L - 1] = count;
  for (int l = L - 1; l > 0; --l) {
    cnt[l - 1].assign(nets[l - 1].size(), 0);
    for (std::size_t j = 0; j < nets[l].size(); ++j) cnt[l - 1][up[l][j]] += cnt[l][j];
  }
  std::vector<std::vector<std::vector<int>>> kids(L);
  for (int l = 0; l < L; ++l) kids[l].assign(nets[l].size(), {});
  for (int l = 1; l < L; ++l)
    for (std::size_t j = 0; j < nets[l].size(); ++j)
      if (cnt[l][j] > 0) kids[l - 1][up[l][j]].push_back(static_cast<int>(j));

  // Depth-first numbering fixes contiguous member ranges.
  std::vector<std::vector<int>> cube_of(L);
  for (int l = 0; l < L; ++l) cube_of[l].assign(nets[l].size(), -1);
  std::vector<std::size_t> leaf_offset(nets[L - 1].size(), 0);
  std::size_t cursor = 0;
  std::function<int(int, int, int)> emit = [&](int l, int j, int parent) -> int {
    DyadicCube q;
    q.id = static_cast<int>(cubes_.size());
    q.k = k_min_ + l;
    q.parent = parent;
    q.center = nets[l][j];
    q.begin = cursor;
    cube_of[l][j] = q.id;
    cubes_.push_back(q);
    levels_[l].push_back(q.id);
    if (l == L - 1) {
      leaf_offset[j] = cursor;
      cursor += cnt[l][j];
    } else {
      for (int c : kids[l][j]) {
        int cid = emit(l + 1, c, q.id);
        cubes_[q.id].children.push_back(cid);
      }
    }
    cubes_[q.id].end = cursor;
    return q.id;
  };
  for (std::size_t j = 0; j < nets[0].size(); ++j)
    if (cnt[0][j] > 0) emit(0, static_cast<int>(j), -1);

  samples_.spacing = cloud.spacing;
  samples_.points.resize(cloud.size());
  samples_.weights.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::size_t pos = leaf_offset[leaf[i]]++;
    samples_.points[pos] = cloud.points[i];
    samples_.weights[pos] = cloud.weights[i];
  }
  std::vector<Box> pb;
  pb.reserve(samples_.size());
  for (const Point& p : samples_.points) pb.push_back({p, p});
  sample_tree_ = BoxTree(std::move(pb), 16);
  finish_sampled();
  for (int l = 0; l < L; ++l) {
    std::vector<Box> boxes;
    for (int id : levels_[l]) boxes.push_back(cubes_[id].region);
    level_trees_.emplace_back(std::move(boxes));
  }
}

void DyadicGrid::finish_sampled() {
  const int n = E_->dim();
  const bool unbounded = !E_->bounded();
  for (DyadicCube& q : cubes_) {
    Box bb = Box::empty(E_->ambient_dim());
    double outer = 0.0, sig = 0.0;
    for (std::size_t i = q.begin; i < q.end; ++i) {
      bb.expand(samples_.points[i]);
      outer = std::max(outer, (samples_.points[i] - q.center).norm());
      sig += samples_.weights[i];
    }
    q.region = bb;
    q.outer = outer;
    q.sigma = sig;
    double R = std::max(outer, q.side()) * 1.5;
    double nearest = kInf;
    sample_tree_.query_ball(q.center, R, [&](std::size_t i) {
      if (i >= q.begin && i < q.end) return;
      nearest = std::min(nearest, (samples_.points[i] - q.center).norm());
    });
    q.r = std::isfinite(nearest) ? nearest : R;
    if (unbounded)
      for (int i = 0; i < n; ++i)
        if (bb.lo(i) - window_.lo(i) < samples_.spacing || window_.hi(i) - bb.hi(i) < samples_.spacing) q.rim = true;
  }
}

const DyadicCube& DyadicGrid::cube(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= cubes_.size()) throw ArgumentError("unknown cube id " + std::to_string(id));
  return cubes_[static_cast<std::size_t>(id)];
}

const std::vector<int>& DyadicGrid::level(int k) const {
  if (k < k_min_ || k > k_max_) throw ArgumentError("grid level out of range");
  return levels_[k - k_min_];
}

int DyadicGrid::locate(const Point& x, int k) const {
  if (k < k_min_ || k > k_max_) return -1;
  if (flat_) {
    const int n = E_->dim();
    const double s = std::ldexp(1.0, -k);
    long long pid = 0, stride = 1;
    for (int i = 0; i < n; ++i) {
      long long m = std::llround((base_.hi(i) - base_.lo(i)) / s);
      long long j = static_cast<long long>(std::floor((x(i) - base_.lo(i)) / s));
      if (x(i) == base_.hi(i)) j = m - 1;
      if (j < 0 || j >= m) return -1;
      pid += j * stride;
      stride *= m;
    }
    return levels_[k - k_min_][static_cast<std::size_t>(pid)];
  }
  auto [i, dist] = sample_tree_.nearest(x, [&](std::size_t j) { return (samples_.points[j] - x).norm(); });
  if (i >= samples_.size()) return -1;
  for (int id : levels_[k - k_min_])
    if (i >= cubes_[id].begin && i < cubes_[id].end) return id;
  return -1;
}

double DyadicGrid::distance_to_cube(int id, const Point& x) const {
  const DyadicCube& q = cube(id);
  if (flat_) return q.region.distance(x);
  double best = kInf;
  for (std::size_t i = q.begin; i < q.end; ++i) best = std::min(best, (samples_.points[i] - x).norm());
  return best;
}

double DyadicGrid::distance_to_cube(int id, const Box& b) const {
  const DyadicCube& q = cube(id);
  if (flat_) return q.region.distance(b);
  double best = kInf;
  for (std::size_t i = q.begin; i < q.end; ++i) best = std::min(best, b.distance(samples_.points[i]));
  return best;
}

WeightedCloud DyadicGrid::quadrature(int id, double h) const {
  const DyadicCube& q = cube(id);
  WeightedCloud out;
  if (!flat_) {
    out.spacing = samples_.spacing;
    out.points.assign(samples_.points.begin() + static_cast<std::ptrdiff_t>(q.begin),
                      samples_.points.begin() + static_cast<std::ptrdiff_t>(q.end));
    out.weights.assign(samples_.weights.begin() + static_cast<std::ptrdiff_t>(q.begin),
                       samples_.weights.begin() + static_cast<std::ptrdiff_t>(q.end));
    return out;
  }
  const int n = E_->dim();
  const double s = q.side();
  int m = std::max(1, static_cast<int>(std::lround(s / h)));
  double step = s / m, w = std::pow(step, n);
  out.spacing = step;
  std::vector<int> idx(n, 0);
  while (true) {
    Point p = q.region.lo;
    for (int i = 0; i < n; ++i) p(i) += (idx[i] + 0.5) * step;
    out.points.push_back(p);
    out.weights.push_back(w);
    int i = 0;
    while (i < n && ++idx[i] == m) idx[i++] = 0;
    if (i == n) break;
  }
  return out;
}

bool DyadicGrid::is_ancestor(int a, int q) const {
  while (q >= 0) {
    if (q == a) return true;
    q = cubes_[static_cast<std::size_t>(q)].parent;
  }
  return false;
}

CubeRef DyadicGrid::ref(int id) const {
  const DyadicCube& q = cube(id);
  return {q.k, q.id, q.center, q.region};
}

CubeRef DyadicGrid::flat_ref(int k, const std::vector<long long>& idx) const {
  const int n = E_->dim(), d = E_->ambient_dim();
  const double s = std::ldexp(1.0, -k);
  Point lo = Point::Zero(d), hi = Point::Zero(d);
  for (int i = 0; i < n; ++i) {
    lo(i) = base_.lo(i) + static_cast<double>(idx[i]) * s;
    hi(i) = lo(i) + s;
  }
  CubeRef r{k, -1, 0.5 * (lo + hi), {lo, hi}};
  if (k <= k_max_) {
    long long pid = 0, stride = 1;
    for (int i = 0; i < n; ++i) {
      pid += idx[i] * stride;
      stride *= std::llround((base_.hi(i) - base_.lo(i)) / s);
    }
    r.id = levels_[k - k_min_][static_cast<std::size_t>(pid)];
  }
  return r;
}

std::optional<CubeRef> DyadicGrid::ref_at(const Point& x, int k) const {
  if (!resolves(k)) return std::nullopt;
  if (flat_) {
    const int n = E_->dim();
    const double s = std::ldexp(1.0, -k);
    std::vector<long long> idx(n);
    for (int i = 0; i < n; ++i) {
      long long m = std::llround((base_.hi(i) - base_.lo(i)) / s);
      long long j = static_cast<long long>(std::floor((x(i) - base_.lo(i)) / s));
      if (x(i) == base_.hi(i)) j = m - 1;
      if (j < 0 || j >= m) return std::nullopt;
      idx[i] = j;
    }
    return flat_ref(k, idx);
  }
  int id = locate(x, k);
  if (id < 0) return std::nullopt;
  return ref(id);
}

bool DyadicGrid::visit_near(const Box& b, int k, double margin, const Box* clip,
                            const std::function<bool(const CubeRef&)>& f) const {
  if (!resolves(k)) return false;
  if (flat_) {
    const int n = E_->dim();
    const double s = std::ldexp(1.0, -k);
    std::vector<long long> lo(n), hi(n), idx(n);
    for (int i = 0; i < n; ++i) {
      long long m = std::llround((base_.hi(i) - base_.lo(i)) / s);
      lo[i] = std::max(0LL, static_cast<long long>(std::floor((b.lo(i) - margin - base_.lo(i)) / s)) - 1);
      hi[i] = std::min(m - 1, static_cast<long long>(std::floor((b.hi(i) + margin - base_.lo(i)) / s)) + 1);
      if (clip) {
        lo[i] = std::max(lo[i], static_cast<long long>(std::floor((clip->lo(i) - base_.lo(i)) / s)) - 1);
        hi[i] = std::min(hi[i], static_cast<long long>(std::floor((clip->hi(i) - base_.lo(i)) / s)) + 1);
      }
      if (hi[i] < lo[i]) return false;
      idx[i] = lo[i];
    }
    while (true) {
      CubeRef r = flat_ref(k, idx);
      if (r.region.distance(b) <= margin && (!clip || r.region.intersects(*clip)) && f(r)) return true;
      int i = 0;
      while (i < n && ++idx[i] > hi[i]) {
        idx[i] = lo[i];
        ++i;
      }
      if (i == n) return false;
    }
  }
  const BoxTree& t = level_trees_[k - k_min_];
  std::vector<int> hits;
  t.query(b.inflate(margin), [&](std::size_t j) { hits.push_back(levels_[k - k_min_][j]); });
  std::sort(hits.begin(), hits.end());
  for (int id : hits)
    if ((!clip || cubes_[id].region.intersects(*clip)) && distance_to_cube(id, b) <= margin && f(ref(id))) return true;
  return false;
}

std::vector<CubeRef> DyadicGrid::cubes_near(const Box& b, int k, double margin, const Box* clip) const {
  std::vector<CubeRef> out;
  visit_near(b, k, margin, clip, [&](const CubeRef& q) {
    out.push_back(q);
    return false;
  });
  return out;
}

CubeRef DyadicGrid::ancestor(const CubeRef& q, int k) const {
  if (k > q.k) throw ArgumentError("ancestor generation is finer than the cube");
  if (k < k_min_) throw ArgumentError("ancestor generation below k_min");
  if (flat_) return *ref_at(q.center, k);
  int id = q.id;
  while (cubes_[id].k > k) id = cubes_[id].parent;
  return ref(id);
}

std::vector<CubeRef> DyadicGrid::children(const CubeRef& q) const {
  std::vector<CubeRef> out;
  if (!resolves(q.k + 1)) return out;
  if (flat_) return cubes_near(Box{q.center, q.center}, q.k + 1, 0.0);
  for (int c : cubes_[q.id].children) out.push_back(ref(c));
  return out;
}

double DyadicGrid::distance(const CubeRef& q, const Box& b) const {
  if (flat_ || q.id < 0) return q.region.distance(b);
  return distance_to_cube(q.id, b);
}

double DyadicGrid::distance(const CubeRef& q, const Point& x) const {
  if (flat_ || q.id < 0) return q.region.distance(x);
  return distance_to_cube(q.id, x);
}

nlohmann::json DyadicGrid::to_json() const {
  nlohmann::json cubes = nlohmann::json::array();
  for (const DyadicCube& q : cubes_) {
    nlohmann::json c{{"id", q.id}, {"k", q.k}, {"parent", q.parent}, {"r", q.r}, {"sigma", q.sigma}, {"rim", q.rim}};
    c["center"] = std::vector<double>(q.center.data(), q.center.data() + q.center.size());
    cubes.push_back(std::move(c));
  }
  return {{"boundary", E_->variant()}, {"k_min", k_min_}, {"k_max", k_max_}, {"flat", flat_}, {"cubes", cubes}};
}

// ---------------------------------------------------------------------------

GridPtr build_grid(BoundaryPtr E, int k_min, int k_max, const GridOptions& opt) {
  return std::make_shared<DyadicGrid>(std::move(E), k_min, k_max, opt);
}

GridReport verify_grid(const DyadicGrid& g, double c1_claim) {
  GridReport rep;
  const auto& cubes = g.cubes();
  rep.cubes = cubes.size();
  const int n = g.boundary().dim();

  // (i) every level partitions the same total.
  double total = 0.0;
  for (int id : g.level(g.k_min())) total += cubes[id].sigma;
  for (int k = g.k_min(); k <= g.k_max(); ++k) {
    double s = 0.0;
    for (int id : g.level(k)) s += cubes[id].sigma;
    rep.partition_error = std::max(rep.partition_error, std::abs(s - total) / total);
    if (g.flat()) continue;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (int id : g.level(k)) ranges.push_back({cubes[id].begin, cubes[id].end});
    std::sort(ranges.begin(), ranges.end());
    std::size_t cur = 0;
    for (auto [b, e] : ranges) {
      if (b != cur || e <= b) ++rep.violations_cover;
      cur = e;
    }
    if (cur != g.samples().size()) ++rep.violations_cover;
  }
  if (rep.partition_error > 1e-9) ++rep.violations_cover;

  // (ii) nesting, exhaustively over pairs with m >= k.
  auto contained = [&](const DyadicCube& a, const DyadicCube& b) {
    if (g.flat()) return b.region.contains(a.region);
    return a.begin >= b.begin && a.end <= b.end;
  };
  auto disjoint = [&](const DyadicCube& a, const DyadicCube& b) {
    if (g.flat()) {
      for (int i = 0; i < n; ++i)
        if (a.region.lo(i) >= b.region.hi(i) || b.region.lo(i) >= a.region.hi(i)) return true;
      return false;
    }
    return a.end <= b.begin || b.end <= a.begin;
  };
  for (const DyadicCube& a : cubes)
    for (const DyadicCube& b : cubes) {
      if (a.k < b.k || a.id == b.id) continue;
      bool c = contained(a, b);
      if (!(c || disjoint(a, b)) || (c != g.is_ancestor(b.id, a.id) && a.k > b.k)) ++rep.violations_nesting;
    }

  // (iii) unique parent one generation up.
  std::vector<int> seen(cubes.size(), 0);
  for (const DyadicCube& q : cubes)
    for (int c : q.children) {
      ++seen[c];
      if (cubes[c].parent != q.id || cubes[c].k != q.k + 1) ++rep.violations_parent;
    }
  for (const DyadicCube& q : cubes) {
    bool root = q.k == g.k_min();
    if (root != (q.parent < 0) || seen[q.id] != (root ? 0 : 1)) ++rep.violations_parent;
  }

  // (iv), (v)
  const auto& S = g.samples();
  for (const DyadicCube& q : cubes) {
    double l = q.side();
    double diam = g.flat() ? q.region.diameter() : std::min(q.region.diameter(), 2.0 * q.outer);
    rep.c1 = std::max(rep.c1, diam / l);
    if (diam > c1_claim * l) ++rep.violations_diameter;
    rep.a0 = std::min(rep.a0, q.r / l);
    bool ok = q.r > 0.0;
    if (g.flat()) {
      ok = ok && q.region.contains(Box::around(q.center, q.r).clamp(q.center));
      for (int i = 0; i < n; ++i) ok = ok && q.center(i) - q.r >= q.region.lo(i) - 1e-15 && q.center(i) + q.r <= q.region.hi(i) + 1e-15;
    } else {
      g.sample_index().query_ball(q.center, q.r, [&](std::size_t i) {
        if ((i < q.begin || i >= q.end) && (S.points[i] - q.center).norm() < q.r) ok = false;
      });
    }
    if (!ok) ++rep.violations_ball;
  }
  return rep;
}

std::vector<int> discretized_carleson(const DyadicGrid& g, int q) {
  g.cube(q);
  std::vector<int> out, stack{q};
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    out.push_back(c);
    for (int ch : g.cube(c).children) stack.push_back(ch);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> discretized_sawtooth(const DyadicGrid& g, const std::vector<int>& family, std::optional<int> q0) {
  std::set<int> F;
  for (int a : family) {
    g.cube(a);
    if (!F.insert(a).second) throw ArgumentError("cube family lists a cube twice");
  }
  for (int a : family)
    for (int b : family)
      if (a != b && g.is_ancestor(a, b)) throw ArgumentError("cube family is not pairwise disjoint");
  std::vector<int> pool;
  if (q0) {
    pool = discretized_carleson(g, *q0);
  } else {
    pool.resize(g.size());
    std::iota(pool.begin(), pool.end(), 0);
  }
  std::vector<int> out;
  for (int c : pool) {
    bool removed = false;
    for (int a = c; a >= 0 && !removed; a = g.cube(a).parent) removed = F.count(a) > 0;
    if (!removed) out.push_back(c);
  }
  return out;
}

CubeBall cube_ball(const DyadicGrid& g, int q) {
  const DyadicCube& c = g.cube(q);
  return {{c.center, c.r}, {c.center, c.r}, c.outer / c.r};
}

double thin_boundary_check(const DyadicGrid& g, int q, double tau) {
  if (!(tau > 0.0) || tau >= 1.0) throw ArgumentError("thin boundary check needs tau in (0, 1)");
  const DyadicCube& c = g.cube(q);
  const double band = tau * c.side();
  if (g.flat()) {
    const int n = g.boundary().dim();
    const auto* h = dynamic_cast<const HyperplaneBoundary*>(&g.boundary());
    const bool patch = h && h->has_patch();
    double inner = 1.0;
    for (int i = 0; i < n; ++i) {
      double lo = c.region.lo(i), hi = c.region.hi(i);
      bool lo_open = !patch || lo > h->base_box().lo(i);
      bool hi_open = !patch || hi < h->base_box().hi(i);
      double ext = (hi - lo) - (lo_open ? band : 0.0) - (hi_open ? band : 0.0);
      inner *= std::max(0.0, ext);
    }
    return 1.0 - inner / c.sigma;
  }
  const auto& S = g.samples();
  double w = 0.0;
  for (std::size_t i = c.begin; i < c.end; ++i) {
    bool near = false;
    g.sample_index().query_ball(S.points[i], band, [&](std::size_t j) {
      if (!near && (j < c.begin || j >= c.end) && (S.points[j] - S.points[i]).norm() <= band) near = true;
    });
    if (near) w += S.weights[i];
  }
  return w / c.sigma;
}

double tau0_formula(double c1, int n) { return std::pow(2.0 * c1 * c1, -1.0 / n); }

Tau0Ball tau0_ball(const DyadicGrid& g, int q, double c1, double c2) {
  const DyadicCube& c = g.cube(q);
  const int n = g.boundary().dim();
  Tau0Ball t;
  t.tau0 = tau0_formula(c1, n);
  t.ball = {c.center, t.tau0 * c.r};
  t.sigma_q = c.sigma;
  t.lower_bound = c.sigma / (2.0 * std::pow(c1, 4) * std::pow(c2, n));
  t.upper_bound = 0.75 * c.sigma;
  if (g.flat()) {
    t.sigma_ball = g.boundary().measure_in_ball(c.center, t.ball.radius);
    t.closure_inside = t.ball.radius <= c.r;
  } else {
    const auto& S = g.samples();
    t.closure_inside = true;
    g.sample_index().query_ball(c.center, t.ball.radius, [&](std::size_t i) {
      if ((S.points[i] - c.center).norm() > t.ball.radius) return;
      if (i >= c.begin && i < c.end)
        t.sigma_ball += S.weights[i];
      else
        t.closure_inside = false;
    });
  }
  t.pass = t.closure_inside && t.sigma_ball >= t.lower_bound && t.sigma_ball <= t.upper_bound;
  return t;
}

}  // namespace rectilab
