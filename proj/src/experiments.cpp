#include "rectilab/experiments.hpp"

#include "rectilab/parallel.hpp"
#include "rectilab/rng.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <ostream>
#include <sstream>
#include <thread>

namespace rectilab {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Schema helpers

bool same_kind(const json& def, const json& v) {
  if (def.is_null()) return true;
  if (def.is_number()) return v.is_number();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

/// Defaults overlaid by the given values; unknown keys and mistyped values are rejected.
json merge_params(const json& defaults, const json& given, const std::string& path) {
  if (!given.is_object()) throw ConfigError(path + ": expected an object");
  json out = defaults;
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!defaults.contains(it.key())) throw ConfigError(path + "." + it.key() + ": unknown key");
    if (!same_kind(defaults[it.key()], it.value()))
      throw ConfigError(path + "." + it.key() + ": expected " + std::string(defaults[it.key()].type_name()));
    out[it.key()] = it.value();
  }
  return out;
}

void require_exponent(const json& p, const char* key, const std::string& path) {
  if (!p.contains(key)) return;
  const double v = p[key].get<double>();
  if (!(v > 1) || !std::isfinite(v)) throw ConfigError(path + "." + key + ": exponent must satisfy 1 < p < infinity");
}

std::vector<int> ints(const json& a) { return a.get<std::vector<int>>(); }
std::vector<double> nums(const json& a) { return a.get<std::vector<double>>(); }

double max_over_min(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo > 0 ? *hi / *lo : kInf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared setup

WqOptions wq_options(const RunSettings& s) {
  WqOptions o;
  o.paper_constants = s.paper_constants;
  if (s.whitney.contains("c0")) o.c0 = s.whitney["c0"].get<double>();
  if (s.whitney.contains("m0")) o.m0 = s.whitney["m0"].get<int>();
  return o;
}

RegionOptions region_options(const RunSettings& s) {
  RegionOptions r;
  r.wq = wq_options(s);
  if (s.whitney.contains("lambda")) r.lambda = s.whitney["lambda"].get<double>();
  return r;
}

struct PlaneSetup {
  BoundaryPtr E;
  GridPtr g;
  ConeContext ctx;
};

PlaneSetup plane_setup(const RunSettings& s) {
  PlaneSetup p;
  p.E = scenario_boundary(s.boundary);
  if (!dynamic_cast<const HyperplaneBoundary*>(p.E.get()))
    throw ConfigError("boundary: this check runs on a hyperplane");
  GridOptions go;
  const int d = p.E->ambient_dim();
  const double half = s.grid.value("window_half", 2.0);
  go.window = Box{Point(Point::Constant(d - 1, -half)), Point(Point::Constant(d - 1, half))};
  go.seed = s.seed;
  p.g = build_grid(p.E, s.grid.value("k_min", 0), s.grid.value("k_max", 5), go);
  p.ctx = cone_context(p.g, s.whitney.value("reach", 16.0), region_options(s), true);
  return p;
}

Point plane_point(int d, const std::vector<double>& x) {
  Point p = Point::Zero(d);
  for (int i = 0; i + 1 < d && i < static_cast<int>(x.size()); ++i) p(i) = x[i];
  return p;
}

WalkConfig walks(const json& p, const RunSettings& s, const char* key = "walks") {
  WalkConfig c;
  c.walks = p[key].get<std::size_t>();
  c.seed = s.seed;
  c.workers = s.workers;
  return c;
}

FunctionalReport make_report(std::string id, double lhs, double rhs, double constant, double tol, bool pass) {
  FunctionalReport r;
  r.id = std::move(id);
  r.lhs = lhs;
  r.rhs = rhs;
  r.constant = constant;
  r.tolerance = tol;
  r.pass = pass;
  return r;
}

using Reports = std::vector<FunctionalReport>;
using CheckFn = std::function<Reports(const json&, const RunSettings&)>;

struct CheckKind {
  int stage;
  json defaults;
  CheckFn fn;
};

// ---------------------------------------------------------------------------
// Checks

Reports check_carleson_flat(const json& p, const RunSettings& s) {
  auto t0 = std::chrono::steady_clock::now();
  BoundaryPtr E = scenario_boundary(s.boundary);
  CarlesonOptions opt;
  opt.sub = p["sub"].get<int>();
  opt.workers = s.workers;
  opt.layer.seed = s.seed;
  const Ball B{Point::Zero(E->ambient_dim()), p["radius"].get<double>()};
  auto a = carleson_ur_functional(*E, B, opt);
  auto b = carleson_ur_functional(*E, B, opt.refined());
  const double secs = seconds_since(t0);
  const double decay = b.ratio > 0 ? a.ratio / b.ratio : kInf;
  const bool pass = a.ratio <= p["max_ratio"].get<double>() && decay >= p["min_decay"].get<double>() &&
                    secs <= p["time_limit"].get<double>();
  auto r = make_report("carleson-ratio", a.ratio, p["max_ratio"].get<double>(), decay, p["max_ratio"].get<double>(),
                       pass);
  r.std_err = a.err_est;
  r.sweep.push_back({a.window, a.ratio, 0, 1, a.err_est, a.ratio <= p["max_ratio"].get<double>()});
  r.sweep.push_back({b.window, b.ratio, a.ratio, decay, b.err_est, decay >= p["min_decay"].get<double>()});
  r.extra = {{"default", a.to_json()}, {"refined", b.to_json()}, {"decay", decay}, {"seconds", secs}};
  return {r};
}

Reports check_shell(const json& p, const RunSettings& s) {
  auto t0 = std::chrono::steady_clock::now();
  SphereBoundary sph(3, Point::Zero(3), 1.0);
  LayerOptions lo;
  lo.sphere_panels = p["sphere_panels"].get<int>();
  lo.seed = s.seed;
  SingleLayer S(sph, Density::one(), lo);
  Rng rng(derive_seed(s.seed, 0, 0x5e11));
  const int n = p["points"].get<int>();
  double worst_in = 0, worst_out = 0;
  for (int i = 0; i < n; ++i) {
    const Point dir = rng.on_sphere(3);
    const Point xin = dir * rng.uniform(0.0, 0.95);
    const Point xout = dir * rng.uniform(1.05, 3.0);
    worst_in = std::max(worst_in, std::abs(S.value(xin) - 1.0));
    worst_out = std::max(worst_out, std::abs(S.value(xout) * xout.norm() - 1.0));
  }
  const double secs = seconds_since(t0), tol = p["tolerance"].get<double>();
  const double worst = std::max(worst_in, worst_out);
  auto r = make_report("shell", worst, tol, worst, tol, worst <= tol && secs <= p["time_limit"].get<double>());
  r.extra = {{"panels", S.panels()}, {"inside", worst_in}, {"outside", worst_out}, {"seconds", secs}};
  return {r};
}

Reports check_wos(const json& p, const RunSettings& s) {
  auto t0 = std::chrono::steady_clock::now();
  const double k = p["k_sigma"].get<double>(), max_se = p["max_stderr"].get<double>();
  WalkConfig cfg = walks(p, s);
  HyperplaneBoundary plane(3);
  auto m = wos_harmonic_measure(plane, make_point({0, 0, 1}), {Point::Zero(3), 1.0}, cfg);
  const double exact = 1 - 1 / std::sqrt(2.0);
  auto a = make_report("halfspace-disk", m.mean, exact, m.mean / exact, max_se,
                       std::abs(m.mean - exact) <= k * m.std_err && m.std_err <= max_se);
  a.std_err = m.std_err;
  a.extra = m.to_json();

  SphereBoundary sph(3, Point::Zero(3), 1.0);
  const double r = p["ball_radius"].get<double>();
  const Point north = make_point({0, 0, 1});
  auto b = wos_harmonic_measure(sph, Point::Zero(3), {north, r}, cfg);
  const double exact_b = sph.measure_in_ball(north, r) / (4 * kPi);
  auto c = make_report("ball-centre", b.mean, exact_b, b.mean / exact_b, max_se,
                       std::abs(b.mean - exact_b) <= k * b.std_err);
  c.std_err = b.std_err;
  c.extra = b.to_json();
  const double secs = seconds_since(t0);
  a.extra["seconds"] = secs;
  if (secs > p["time_limit"].get<double>()) {
    a.pass = false;
    a.flag("time limit exceeded");
  }
  return {a, c};
}

Reports check_green(const json& p, const RunSettings& s) {
  const double k = p["k_sigma"].get<double>();
  WalkConfig cfg = walks(p, s);
  HyperplaneBoundary plane(3);
  auto g = green_function(plane, make_point({0, 0, 1}), make_point({0, 0, 2}), cfg);
  const double exact = 1 / (6 * kPi);
  auto a = make_report("green-value", g.value, exact, g.value / exact, k, std::abs(g.value - exact) <= k * g.std_err);
  a.std_err = g.std_err;
  a.extra = g.to_json();
  auto sym = green_symmetry(plane, make_point({0.3, 0, 1}), make_point({0, 0.2, 2.5}), cfg);
  auto b = make_report("green-symmetry", sym.xy.value, sym.yx.value, sym.diff, k,
                       std::abs(sym.diff) <= k * sym.std_err);
  b.std_err = sym.std_err;
  b.extra = sym.to_json();
  return {a, b};
}

Reports check_rh(const json& p, const RunSettings& s) {
  const double q = p["p"].get<double>(), target = p["target"].get<double>(), tol = p["tolerance"].get<double>();
  const double k = p["k_sigma"].get<double>();
  BoundaryPtr E = scenario_boundary(s.boundary);
  RhOptions opt;
  opt.walks = walks(p, s);
  opt.cell_fraction = p["cell_fraction"].get<double>();
  Reports out;
  FunctionalReport sc;
  sc.id = "rh-scale";
  sc.tolerance = tol;
  std::vector<FunctionalReport> per;
  for (double r : nums(p["radii"])) {
    auto v = rh_check(*E, {Point::Zero(E->ambient_dim()), r}, q, opt);
    sc.sweep.push_back({r, v.lhs, target, v.constant, v.std_err, std::abs(v.lhs - target) <= tol});
    per.push_back(v);
  }
  bool within = true, invariant = true;
  for (std::size_t i = 0; i < per.size(); ++i) {
    within = within && std::abs(per[i].lhs - target) <= tol;
    for (std::size_t j = 0; j < i; ++j)
      invariant = invariant && std::abs(per[i].lhs - per[j].lhs) <=
                                   k * std::hypot(per[i].std_err, per[j].std_err) + 1e-12 * std::abs(per[i].lhs);
  }
  sc.lhs = per.empty() ? 0.0 : per.front().lhs;
  sc.std_err = per.empty() ? 0.0 : per.front().std_err;
  sc.rhs = target;
  sc.constant = per.empty() ? 0.0 : per.front().constant;
  sc.pass = within && invariant;
  sc.extra = {{"within_target", within}, {"scale_invariant", invariant}};
  if (!within) sc.flag("value outside target band");
  out.push_back(sc);

  // approximating domains: same check near the floor of Omega_N
  const auto levels = ints(p["approx_levels"]);
  if (!levels.empty()) {
    auto plane = std::make_shared<HyperplaneBoundary>(3, 1.0);
    auto g = build_grid(plane, 0, 4);
    const double half = p["approx_window"].get<double>();
    auto W = std::make_shared<WhitneyDecomposition>(
        plane, Box{make_point({-half, -half, 0}), make_point({half, half, 16})}, Side::Interior);
    FunctionalReport ap;
    ap.id = "rh-approx";
    ap.tolerance = p["approx_factor"].get<double>();
    std::vector<double> vals;
    RhOptions ao;
    ao.walks = walks(p, s, "approx_walks");
    ao.cell_fraction = opt.cell_fraction;
    for (int N : levels) {
      auto EN = approx_boundary(g, W, N, region_options(s));
      double floor = kInf;
      for (const auto& f : EN->faces()) floor = std::min(floor, f.lo(2));
      const double h = std::ldexp(1.0, -N);
      const Point x = make_point({0.1, 0.1, floor});
      auto v = rh_check(*EN, {x, p["approx_radius"].get<double>() * h}, q, ao);
      vals.push_back(v.lhs);
      ap.sweep.push_back({h, v.lhs, v.rhs, v.constant, v.std_err, true});
      for (const auto& f : v.flags) ap.flag(f);
    }
    ap.constant = max_over_min(vals);
    ap.lhs = vals.front();
    ap.pass = ap.constant <= ap.tolerance;
    out.push_back(ap);
  }
  return out;
}

Reports check_grid_props(const json& p, const RunSettings& s) {
  const std::size_t max_cubes = p["max_cubes"].get<std::size_t>();
  const double c1 = p["c1"].get<double>(), eta = p["eta"].get<double>();
  Reports out;
  GridOptions go;
  go.seed = s.seed;
  auto patch = build_grid(builtin_boundary("plane-patch"), 0, p["patch_k_max"].get<int>(), go);
  auto sphere = build_grid(builtin_boundary("sphere"), 0, p["sphere_k_max"].get<int>(), go);
  for (auto [name, g] : {std::pair<std::string, GridPtr>{"patch", patch}, {"sphere", sphere}}) {
    auto rep = verify_grid(*g);
    auto r = make_report("grid-" + name, static_cast<double>(rep.violations()), 0, rep.c1, 0,
                         rep.violations() == 0 && g->size() <= max_cubes);
    r.extra = {{"cubes", g->size()},
               {"cover", rep.violations_cover},
               {"nesting", rep.violations_nesting},
               {"parent", rep.violations_parent},
               {"diameter", rep.violations_diameter},
               {"ball", rep.violations_ball},
               {"c1", rep.c1},
               {"a0", rep.a0}};
    if (g->size() > max_cubes) r.flag("grid larger than the cube budget");
    out.push_back(r);
  }
  FunctionalReport thin;
  thin.id = "thin-boundary";
  thin.pass = true;
  for (double tau : nums(p["taus"])) {
    double worst = 0;
    for (const auto& c : patch->cubes()) worst = std::max(worst, thin_boundary_check(*patch, c.id, tau));
    const double bound = c1 * std::pow(tau, eta);
    thin.sweep.push_back({tau, worst, bound, worst / bound, 0, worst <= bound});
    thin.pass = thin.pass && worst <= bound;
    thin.constant = std::max(thin.constant, worst / bound);
  }
  out.push_back(thin);
  return out;
}

Reports check_whitney_props(const json& p, const RunSettings& s) {
  Reports out;
  const int k_stop = p["k_stop"].get<int>();
  const std::size_t n = p["samples"].get<std::size_t>();
  const double lam = p["lambda"].get<double>();
  auto plane = std::make_shared<HyperplaneBoundary>(3, 4.0);
  const Box slab{make_point({-1, -1, 0}), make_point({1, 1, 2})};
  WhitneyDecomposition W(plane, slab, Side::Interior);
  auto sphere = builtin_boundary("sphere");
  WhitneyDecomposition Ws(sphere, Box::around(Point::Zero(3), 1.5), Side::Exterior);
  for (auto [name, w, region] : {std::tuple<std::string, const WhitneyDecomposition*, Box>{"plane", &W, slab},
                                 {"sphere-exterior", &Ws, Box::around(Point::Zero(3), 1.5)}}) {
    auto rep = verify_whitney(*w, region, k_stop);
    auto r = make_report("whitney-" + name, static_cast<double>(rep.violations_distance + rep.violations_neighbor), 0,
                         rep.max_ratio, 0, rep.pass() && rep.cubes > 0);
    r.extra = {{"cubes", rep.cubes},         {"distance", rep.violations_distance},
               {"neighbor", rep.violations_neighbor}, {"min_ratio", rep.min_ratio},
               {"max_ratio", rep.max_ratio}, {"max_neighbor_ratio", rep.max_neighbor_ratio}};
    out.push_back(r);
  }
  const Box small{make_point({-0.5, -0.5, 0}), make_point({0.5, 0.5, 1})};
  auto f = pairwise_fattening_check(*plane, W.cubes(small, p["fattening_k_stop"].get<int>()), lam);
  auto fr = make_report("fattening", static_cast<double>(f.violations_overlap), 0, f.tau, lam, f.pass);
  fr.extra = {{"pairs", f.pairs}, {"touching", f.touching}, {"tau", f.tau}, {"min_gap", f.min_gap}};
  out.push_back(fr);

  // ball-box containments
  PlaneSetup P = plane_setup(s);
  const double r = p["ball_radius"].get<double>();
  auto bb = ball_box_cubes(*P.g, Point::Zero(3), r);
  auto T = carleson_box_ball(P.g, P.ctx.W, Point::Zero(3), r, region_options(s));
  auto in = ball_inside(T, Ball{Point::Zero(3), p["ball_inner_factor"].get<double>() * r}, n, s.seed);
  auto ob = inside_ball(T, Point::Zero(3), r, bb.k + 2, n, s.seed + 1);
  auto br = make_report("ball-box", static_cast<double>(in.counterexamples + ob.counterexamples), 0, ob.kappa, 0,
                        in.pass() && ob.pass() && in.hits > 0);
  br.extra = {{"inner_samples", in.samples}, {"inner_hits", in.hits}, {"outer_samples", ob.samples},
              {"kappa", ob.kappa}};
  out.push_back(br);

  // kappa0: 2 lambda-fattened W_Q and W_children inside B(x_Q, kappa0 l(Q))
  const CubeRef Q = *P.g->ref_at(make_point({0.1, 0.1, 0}), 2);
  auto G = tb_geometry(P.ctx, Q);
  std::vector<Box> boxes;
  std::vector<CubeRef> fam{Q};
  for (const auto& c : P.g->children(Q)) fam.push_back(c);
  for (const auto& F : fam)
    for (const auto& I : w_q(*P.g, *P.ctx.W, F, P.ctx.region.wq)) boxes.push_back(fatten(I, 2 * P.ctx.region.lambda));
  Rng rng(derive_seed(s.seed, 0, 0x4b0));
  std::size_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Box& b = boxes[static_cast<std::size_t>(rng.uniform() * static_cast<double>(boxes.size()))];
    Point X(3);
    for (int a = 0; a < 3; ++a) X(a) = rng.uniform(b.lo(a), b.hi(a));
    bad += (X - G.x_Q).norm() >= G.kappa0 * G.ell;
  }
  auto kr = make_report("kappa0", static_cast<double>(bad), 0, G.kappa0, 0, bad == 0);
  kr.extra = {{"samples", n}, {"boxes", boxes.size()}, {"kappa0", G.kappa0}};
  out.push_back(kr);
  return out;
}

HarmonicField green_field_for(const PlaneSetup& P, const CubeRef& Q0, const json& p, const RunSettings& s) {
  auto G = tb_geometry(P.ctx, Q0);
  auto smp = std::make_shared<const ExitSample>(sample_exits(*P.E, G.X_hat, walks(p, s)));
  const double beta = p["beta_fraction"].get<double>() * P.E->project(G.X_hat).distance;
  ExitSmoothing sm{G.x_Q, std::max(2 * beta, 2 * G.B_tilde.radius), beta, beta / 16};
  return green_derivative_field(*P.E, smp, P.E->ambient_dim() - 1, sm);
}

Reports check_good_lambda(const json& p, const RunSettings& s) {
  PlaneSetup P = plane_setup(s);
  const double q = p["q"].get<double>(), stab = p["stability"].get<double>();
  ConeSweepOptions opt;
  opt.depth = p["depth"].get<int>();
  opt.apexes = p["apexes"].get<int>();
  opt.workers = s.workers;
  const Point x = plane_point(3, nums(p["point"]));
  Reports out;
  for (const auto& name : p["fields"].get<std::vector<std::string>>()) {
    FunctionalReport gen;
    gen.id = "good-lambda-" + name;
    gen.tolerance = stab;
    std::vector<double> C;
    bool trunc = true;
    for (int k : ints(p["generations"])) {
      const CubeRef Q0 = *P.g->ref_at(x, k);
      HarmonicField u;
      if (name == "t")
        u = HarmonicField::coordinate(2, 3);
      else if (name == "green")
        u = green_field_for(P, Q0, p, s);
      else
        throw ConfigError("fields: unknown field '" + name + "'");
      auto r = good_lambda_experiment(u, P.ctx, Q0, q, opt, stab);
      C.push_back(r.constant);
      trunc = trunc && r.pass;
      gen.sweep.push_back({Q0.side(), r.lhs, r.rhs, r.constant, r.std_err, r.pass});
      for (const auto& f : r.flags) gen.flag(f);
      gen.extra["generation_" + std::to_string(k)] = r.to_json();
    }
    bool stable = std::all_of(C.begin(), C.end(), [](double c) { return std::isfinite(c) && c > 0; });
    for (double c : C) stable = stable && std::abs(c / C.front() - 1) <= stab;
    gen.constant = C.empty() ? 0.0 : C.front();
    gen.lhs = max_over_min(C);
    gen.pass = stable && trunc && !C.empty();
    gen.extra["stable_generations"] = stable;
    gen.extra["stable_truncations"] = trunc;
    out.push_back(gen);
  }
  return out;
}

Reports check_tb(const json& p, const RunSettings& s) {
  PlaneSetup P = plane_setup(s);
  TbOptions opt;
  opt.q = p["q"].get<double>();
  opt.walks = walks(p, s);
  opt.count_walks = p["count_walks"].get<std::size_t>();
  opt.depth = p["depth"].get<int>();
  opt.apexes = p["apexes"].get<int>();
  opt.exterior_samples = p["exterior_samples"].get<std::size_t>();
  opt.hessian_C = p["hessian_C"].get<double>();
  opt.workers = s.workers;
  const Point x = plane_point(3, nums(p["point"]));
  FunctionalReport r;
  r.id = "tb";
  r.tolerance = p["factor"].get<double>();
  std::vector<double> A;
  bool ext = true;
  double worst_ext = 0;
  for (int k : ints(p["generations"])) {
    auto t = tb_conditions(P.ctx, *P.g->ref_at(x, k), opt);
    A.push_back(t.A0);
    ext = ext && t.ext_pass;
    worst_ext = std::max(worst_ext, t.ext_C);
    r.sweep.push_back({t.geo.ell, t.A0, t.b, t.A0, t.b_se / (t.b * t.b), t.ext_pass});
    for (const auto& f : t.flags) r.flag(f);
    r.extra["generation_" + std::to_string(k)] = t.to_json();
    // the worked example's lower bound sigma(Q) / C with C <= 10
    r.extra["b_bound_C_" + std::to_string(k)] = t.b > 0 ? 1 / t.b : kInf;
  }
  r.lhs = max_over_min(A);
  r.constant = A.empty() ? 0.0 : A.front();
  r.rhs = worst_ext;
  r.pass = !A.empty() && r.lhs <= r.tolerance && ext;
  r.extra["uniform"] = r.lhs <= r.tolerance;
  r.extra["exterior_hessian"] = ext;
  return {r};
}

Reports check_nt_green(const json& p, const RunSettings& s) {
  PlaneSetup P = plane_setup(s);
  NtGreenOptions opt;
  opt.walks = walks(p, s);
  opt.depth = p["depth"].get<int>();
  opt.apexes = p["apexes"].get<int>();
  opt.workers = s.workers;
  const double q = p["q"].get<double>();
  const Point x = plane_point(3, nums(p["point"]));
  FunctionalReport r;
  r.id = "nt-green";
  r.tolerance = p["factor"].get<double>();
  std::vector<double> v;
  for (int k : ints(p["generations"])) {
    const CubeRef Q = *P.g->ref_at(x, k);
    auto t = nt_green_bound(P.ctx, Q, q, opt);
    v.push_back(t.lhs);
    r.sweep.push_back({Q.side(), t.lhs, 0, t.lhs, 0, t.pass});
    for (const auto& f : t.flags) r.flag(f);
    r.extra["generation_" + std::to_string(k)] = t.to_json();
  }
  r.lhs = max_over_min(v);
  r.constant = v.empty() ? 0.0 : v.front();
  r.pass = !v.empty() && r.lhs <= r.tolerance;
  return {r};
}

Reports check_cantor(const json& p, const RunSettings& s) {
  auto t0 = std::chrono::steady_clock::now();
  CarlesonOptions opt;
  opt.sub = p["sub"].get<int>();
  opt.workers = s.workers;
  opt.layer.seed = s.seed;
  FunctionalReport car, sio, base;
  car.id = "cantor-carleson";
  sio.id = "cantor-sio";
  base.id = "plane-baseline";
  base.tolerance = p["plane_flat"].get<double>();
  HyperplaneBoundary line(2);
  CZKernel K{2};
  std::vector<double> cr, sr, br;
  for (int m : ints(p["depths"])) {
    CantorBoundary E(m);
    opt.k_collar = 2 * m + p["collar_extra"].get<int>();
    const Point x = E.left_ends()[0];
    auto a = carleson_ur_functional(E, Ball{x, p["radius"].get<double>()}, opt);
    auto b = carleson_ur_functional(line, Ball{Point::Zero(2), p["radius"].get<double>()}, opt);
    SioOptions so;
    so.h = E.segment_length() / 8;
    so.seed = s.seed;
    so.workers = s.workers;
    std::vector<double> eps;
    for (int j = 1; j <= m; ++j) eps.push_back(0.5 * std::pow(4.0, -j) + 3 * so.h);
    auto c = sio_sup_check(E, K, Density::one(), eps, so);
    cr.push_back(a.ratio);
    br.push_back(b.ratio);
    sr.push_back(c.sup);
    car.sweep.push_back({static_cast<double>(m), a.ratio, 0, a.ratio, a.err_est, true});
    base.sweep.push_back({static_cast<double>(m), b.ratio, 0, b.ratio, b.err_est, true});
    sio.sweep.push_back({static_cast<double>(m), c.sup, 0, c.sup, 0, true});
  }
  int run = 1, best = cr.empty() ? 0 : 1;
  for (std::size_t i = 1; i < cr.size(); ++i) {
    run = cr[i] > cr[i - 1] ? run + 1 : 1;
    best = std::max(best, run);
  }
  car.lhs = best;
  car.rhs = p["min_run"].get<int>();
  car.constant = cr.empty() ? 0.0 : cr.back() / cr.front();
  car.pass = best >= p["min_run"].get<int>();
  bool inc = !sr.empty();
  for (std::size_t i = 1; i < sr.size(); ++i) inc = inc && sr[i] > sr[i - 1];
  sio.lhs = sr.empty() ? 0.0 : sr.back();
  sio.constant = sr.empty() ? 0.0 : sr.back() / sr.front();
  sio.pass = inc;
  base.constant = max_over_min(br);
  base.lhs = base.constant - 1;
  base.pass = base.lhs <= base.tolerance;
  const double secs = seconds_since(t0);
  car.extra = {{"seconds", secs}};
  if (secs > p["time_limit"].get<double>()) {
    car.pass = false;
    car.flag("time limit exceeded");
  }
  return {car, sio, base};
}

Reports check_ainfty(const json& p, const RunSettings& s) {
  BoundaryPtr E = scenario_boundary(s.boundary);
  AinftyOptions opt;
  opt.walks = walks(p, s);
  opt.cell_fraction = p["cell_fraction"].get<double>();
  opt.sets = p["sets"].get<std::size_t>();
  return {ainfty_check(*E, {E->project(plane_point(E->ambient_dim(), nums(p["point"]))).foot, p["radius"].get<double>()},
                       opt)};
}

const std::map<std::string, CheckKind>& registry() {
  static const std::map<std::string, CheckKind> r = {
      {"grid-props",
       {1,
        {{"max_cubes", 10000}, {"taus", {0.05, 0.1, 0.2}}, {"c1", 4.0}, {"eta", 1.0}, {"patch_k_max", 6},
         {"sphere_k_max", 3}},
        check_grid_props}},
      {"whitney-props",
       {2,
        {{"samples", 10000}, {"k_stop", 6}, {"fattening_k_stop", 5}, {"lambda", 0.05}, {"ball_radius", 0.004},
         {"ball_inner_factor", 1.25}},
        check_whitney_props}},
      {"carleson-flat",
       {4, {{"radius", 1.0}, {"sub", 0}, {"max_ratio", 1e-3}, {"min_decay", 4.0}, {"time_limit", 60.0}},
        check_carleson_flat}},
      {"shell", {4, {{"sphere_panels", 41}, {"points", 200}, {"tolerance", 1e-2}, {"time_limit", 30.0}}, check_shell}},
      {"cantor-contrast",
       {4,
        {{"depths", {2, 3, 4, 5, 6}}, {"radius", 0.5}, {"sub", 0}, {"collar_extra", 6}, {"min_run", 4},
         {"plane_flat", 0.1}, {"time_limit", 600.0}},
        check_cantor}},
      {"wos",
       {5, {{"walks", 100000}, {"k_sigma", 3.0}, {"max_stderr", 5e-3}, {"ball_radius", 1.0}, {"time_limit", 60.0}},
        check_wos}},
      {"green", {5, {{"walks", 100000}, {"k_sigma", 3.0}}, check_green}},
      {"rh",
       {5,
        {{"p", 2.0}, {"target", 0.96}, {"tolerance", 2e-2}, {"radii", {0.5, 1.0, 2.0}}, {"k_sigma", 3.0},
         {"walks", 200000}, {"cell_fraction", 1.0 / 16}, {"approx_levels", {4, 5, 6}}, {"approx_factor", 2.0},
         {"approx_walks", 20000}, {"approx_radius", 4.0}, {"approx_window", 0.75}},
        check_rh}},
      {"ainfty",
       {6, {{"walks", 100000}, {"cell_fraction", 1.0 / 16}, {"sets", 400}, {"radius", 1.0}, {"point", {0.0, 0.0}}},
        check_ainfty}},
      {"good-lambda",
       {6,
        {{"q", 2.0}, {"generations", {1, 2, 3}}, {"depth", 2}, {"apexes", 2}, {"walks", 100000},
         {"stability", 0.2}, {"fields", {"t", "green"}}, {"beta_fraction", 1.0 / 6}, {"point", {0.1, 0.1}}},
        check_good_lambda}},
      {"tb",
       {6,
        {{"q", 2.0}, {"generations", {2, 3, 4}}, {"factor", 2.0}, {"walks", 100000}, {"count_walks", 20000000},
         {"depth", 1}, {"apexes", 2}, {"exterior_samples", 1000}, {"hessian_C", 1.0}, {"point", {0.1, 0.1}}},
        check_tb}},
      {"nt-green",
       {6,
        {{"q", 2.0}, {"generations", {2, 3, 4}}, {"factor", 2.0}, {"walks", 100000}, {"depth", 2}, {"apexes", 2},
         {"point", {0.1, 0.1}}},
        check_nt_green}},
  };
  return r;
}

const CheckKind& kind_of(const std::string& k, const std::string& path) {
  auto it = registry().find(k);
  if (it == registry().end()) throw ConfigError(path + ".kind: unknown check kind '" + k + "'");
  return it->second;
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

BoundaryPtr scenario_boundary(const json& spec) {
  if (spec.is_string()) return load_boundary(spec.get<std::string>());
  if (spec.is_object()) return boundary_from_json(spec);
  throw ConfigError("boundary: expected a name or an object");
}

int resolve_workers(std::optional<int> flag) {
  if (flag) return std::max(0, *flag);
  if (const char* e = std::getenv("RECTILAB_WORKERS")) {
    try {
      return std::max(0, std::stoi(e));
    } catch (const std::exception&) {
      throw ConfigError("RECTILAB_WORKERS must be an integer");
    }
  }
  return 0;
}

Scenario Scenario::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario: expected an object");
  static const std::set<std::string> top = {"version", "name",    "seed",   "workers", "paper_constants",
                                            "boundary", "grid", "whitney", "checks",  "out"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!top.count(it.key())) throw ConfigError("scenario." + it.key() + ": unknown key");
  Scenario s;
  try {
    if (!j.contains("version")) throw ConfigError("scenario.version: missing");
    s.version = j["version"].get<int>();
    if (s.version != kScenarioVersion)
      throw ConfigError("scenario.version: unsupported version " + std::to_string(s.version));
    s.name = j.value("name", std::string{});
    s.seed = j.value("seed", std::uint64_t{0});
    s.workers = j.value("workers", 0);
    s.paper_constants = j.value("paper_constants", false);
    s.out = j.value("out", std::string{});
    if (j.contains("boundary")) s.boundary = j["boundary"];
    if (!s.boundary.is_string() && !s.boundary.is_object()) throw ConfigError("scenario.boundary: expected a name or object");
    s.grid = merge_params({{"k_min", 0}, {"k_max", 5}, {"window_half", 2.0}}, j.value("grid", json::object()),
                          "scenario.grid");
    s.whitney = merge_params({{"lambda", 0.05}, {"c0", 0.0}, {"m0", 2}, {"reach", 16.0}},
                             j.value("whitney", json::object()), "scenario.whitney");
    const double lam = s.whitney["lambda"].get<double>();
    if (!(lam > 0) || lam >= kLambda0) throw ConfigError("scenario.whitney.lambda: must lie in (0, 0.2)");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  if (j.contains("checks")) {
    if (!j["checks"].is_array()) throw ConfigError("scenario.checks: expected an array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j["checks"].size(); ++i) {
      const std::string path = "scenario.checks[" + std::to_string(i) + "]";
      const json& c = j["checks"][i];
      if (!c.is_object()) throw ConfigError(path + ": expected an object");
      for (auto it = c.begin(); it != c.end(); ++it)
        if (it.key() != "id" && it.key() != "kind" && it.key() != "params")
          throw ConfigError(path + "." + it.key() + ": unknown key");
      if (!c.contains("kind") || !c["kind"].is_string()) throw ConfigError(path + ".kind: missing");
      CheckSpec cs;
      cs.kind = c["kind"].get<std::string>();
      cs.id = c.contains("id") ? c["id"].get<std::string>() : cs.kind;
      if (!ids.insert(cs.id).second) throw ConfigError(path + ".id: duplicate id '" + cs.id + "'");
      const auto& k = kind_of(cs.kind, path);
      cs.params = merge_params(k.defaults, c.value("params", json::object()), path + ".params");
      for (const char* e : {"p", "q"}) require_exponent(cs.params, e, path + ".params");
      s.checks.push_back(cs);
    }
  }
  return s;
}

json Scenario::to_json() const {
  json c = json::array();
  for (const auto& k : checks) c.push_back({{"id", k.id}, {"kind", k.kind}, {"params", k.params}});
  json j = {{"version", version}, {"name", name},   {"seed", seed},       {"workers", workers},
            {"paper_constants", paper_constants}, {"boundary", boundary}, {"grid", grid},
            {"whitney", whitney}, {"checks", c}};
  if (!out.empty()) j["out"] = out;
  return j;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return Scenario::from_json(j);
}

std::vector<std::string> check_kinds() {
  std::vector<std::string> k;
  for (const auto& [name, _] : registry()) k.push_back(name);
  return k;
}

json check_defaults(const std::string& kind) { return kind_of(kind, "check").defaults; }

json CheckResult::to_json() const {
  json r = json::array();
  for (const auto& x : reports) r.push_back(x.to_json());
  json j = {{"id", id}, {"kind", kind}, {"status", status}, {"reports", r}, {"seconds", seconds}, {"inputs", inputs}};
  if (!error.empty()) j["error"] = error;
  return j;
}

bool RunReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass(); });
}

json RunReport::to_json() const {
  json c = json::array();
  for (const auto& x : checks) c.push_back(x.to_json());
  return {{"scenario", scenario}, {"checks", c}, {"environment", environment}, {"seconds", seconds}, {"ok", ok()}};
}

CheckResult run_check(const CheckSpec& spec, const RunSettings& settings) {
  CheckResult res;
  res.id = spec.id.empty() ? spec.kind : spec.id;
  res.kind = spec.kind;
  auto t0 = std::chrono::steady_clock::now();
  try {
    const auto& k = kind_of(spec.kind, "check");
    const json params = merge_params(k.defaults, spec.params, res.id + ".params");
    for (const char* e : {"p", "q"}) require_exponent(params, e, res.id + ".params");
    res.inputs = {{"kind", spec.kind},           {"params", params},
                  {"seed", settings.seed},       {"workers", settings.workers},
                  {"paper_constants", settings.paper_constants}, {"boundary", settings.boundary},
                  {"grid", settings.grid},       {"whitney", settings.whitney}};
    res.reports = k.fn(params, settings);
    const bool ok = std::all_of(res.reports.begin(), res.reports.end(), [](const auto& r) { return r.pass; });
    res.status = ok ? "pass" : "fail";
  } catch (const std::exception& e) {
    res.status = "error";
    res.error = e.what();
  }
  res.seconds = seconds_since(t0);
  return res;
}

RunReport run(const Scenario& s) {
  auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.scenario = s.name;
  RunSettings st{s.seed, s.workers, s.paper_constants, s.boundary, s.grid, s.whitney};
  std::vector<std::size_t> order(s.checks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return kind_of(s.checks[a].kind, "check").stage < kind_of(s.checks[b].kind, "check").stage;
  });
  for (std::size_t i : order) rep.checks.push_back(run_check(s.checks[i], st));
  rep.environment = {{"compiler", __VERSION__},
                     {"cplusplus", __cplusplus},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"hardware_threads", std::thread::hardware_concurrency()},
                     {"workers", s.workers},
                     {"seed", s.seed}};
  rep.seconds = seconds_since(t0);
  return rep;
}

void emit_csv(const RunReport& r, std::ostream& os) {
  os << "check_id,scale,lhs,rhs,constant,stderr,pass\n";
  for (const auto& c : r.checks) {
    if (c.status == "error") {
      os << c.id << ",,,,,,error\n";
      continue;
    }
    for (const auto& f : c.reports) {
      const std::string id = c.id + "/" + f.id;
      os << id << ",," << fmt17(f.lhs) << ',' << fmt17(f.rhs) << ',' << fmt17(f.constant) << ',' << fmt17(f.std_err)
         << ',' << (f.pass ? "true" : "false") << '\n';
      for (const auto& w : f.sweep)
        os << id << ',' << fmt17(w.scale) << ',' << fmt17(w.lhs) << ',' << fmt17(w.rhs) << ',' << fmt17(w.constant)
           << ',' << fmt17(w.std_err) << ',' << (w.pass ? "true" : "false") << '\n';
    }
  }
}

void emit_text(const RunReport& r, std::ostream& os) {
  os << "scenario: " << (r.scenario.empty() ? "(unnamed)" : r.scenario) << '\n';
  for (const auto& c : r.checks) {
    os << "[" << c.status << "] " << c.id << " (" << c.kind << ")\n";
    if (!c.error.empty()) os << "  error: " << c.error << "\n  replay: " << c.inputs.dump() << '\n';
    for (const auto& f : c.reports) {
      os << "  " << (f.pass ? "pass" : "FAIL") << ' ' << f.id << ": lhs=" << fmt17(f.lhs) << " rhs=" << fmt17(f.rhs)
         << " constant=" << fmt17(f.constant) << " stderr=" << fmt17(f.std_err) << '\n';
      for (const auto& fl : f.flags) os << "    flag: " << fl << '\n';
      if (!f.pass) os << "    replay: " << c.inputs.dump() << '\n';
    }
  }
  os << (r.ok() ? "all checks passed" : "some checks failed") << '\n';
}

void emit(const RunReport& r, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  auto open = [&](const std::string& name) {
    std::ofstream f(std::filesystem::path(dir) / name);
    if (!f) throw IoError("cannot write '" + (std::filesystem::path(dir) / name).string() + "'");
    return f;
  };
  {
    auto f = open("report.json");
    f << r.to_json().dump(2) << '\n';
  }
  {
    auto f = open("report.csv");
    emit_csv(r, f);
  }
  {
    auto f = open("report.txt");
    emit_text(r, f);
  }
}

std::vector<std::string> builtin_names() { return {"halfspace-acceptance", "halfspace-smoke"}; }

Scenario builtin_scenario(const std::string& name) {
  json j = {{"version", kScenarioVersion}, {"name", name}, {"seed", 0}, {"boundary", "plane"}};
  if (name == "halfspace-acceptance") {
    j["checks"] = json::array({
        {{"id", "c1-flat-carleson"}, {"kind", "carleson-flat"}},
        {{"id", "c2-shell"}, {"kind", "shell"}},
        {{"id", "c3-wos"}, {"kind", "wos"}},
        {{"id", "c4-green"}, {"kind", "green"}},
        {{"id", "c5-reverse-hoelder"}, {"kind", "rh"}},
        {{"id", "c6-grid"}, {"kind", "grid-props"}},
        {{"id", "c7-whitney"}, {"kind", "whitney-props"}},
        {{"id", "c8-good-lambda"}, {"kind", "good-lambda"}},
        {{"id", "c9-tb"}, {"kind", "tb"}},
        {{"id", "c10-cantor"}, {"kind", "cantor-contrast"}},
        {{"id", "c11-nt-green"}, {"kind", "nt-green"}},
    });
  } else if (name == "halfspace-smoke") {
    j["checks"] = json::array({
        {{"id", "wos"}, {"kind", "wos"}, {"params", {{"walks", 20000}, {"max_stderr", 1e-2}}}},
        {{"id", "green"}, {"kind", "green"}, {"params", {{"walks", 20000}}}},
        {{"id", "rh"},
         {"kind", "rh"},
         {"params", {{"walks", 50000}, {"target", 0.48}, {"approx_levels", json::array()}}}},
        {{"id", "good-lambda"},
         {"kind", "good-lambda"},
         {"params", {{"fields", {"t"}}, {"generations", {1, 2}}, {"depth", 1}}}},
    });
  } else {
    throw ConfigError("unknown builtin scenario '" + name + "'");
  }
  return Scenario::from_json(j);
}

}  // namespace rectilab
