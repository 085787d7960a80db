// rectilab: command line front end. Every subcommand prints JSON (or writes it
// to --out); the exit code is 0 on success, 1 when a check fails and 2 on
// configuration or runtime errors.

#include "rectilab/experiments.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace rectilab;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool paper_constants = false;
  std::string out;
  std::string boundary = "plane";
};

Point parse_point(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  if (v.empty() || v.size() > 4) throw ArgumentError("point '" + s + "': expected 1 to 4 comma separated numbers");
  Point p(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p[static_cast<Eigen::Index>(i)] = v[i];
  return p;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  return v;
}

json point_json(const Point& p) { return std::vector<double>(p.data(), p.data() + p.size()); }

json boundary_json(const std::string& b) {
  auto j = json::parse(b, nullptr, false);
  return j.is_discarded() ? json(b) : j;
}

RunSettings settings(const Globals& g) {
  RunSettings s;
  s.seed = g.seed.value_or(0);
  s.workers = resolve_workers(g.workers);
  s.paper_constants = g.paper_constants;
  s.boundary = boundary_json(g.boundary);
  return s;
}

WalkConfig walk_config(const Globals& g, std::size_t walks) {
  WalkConfig c;
  c.walks = walks;
  c.seed = g.seed.value_or(0);
  c.workers = resolve_workers(g.workers);
  return c;
}

void write_output(const Globals& g, const json& j) {
  if (g.out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(g.out);
  if (!f) throw IoError("cannot write " + g.out);
  f << j.dump(2) << '\n';
}

/// Parameters for check-backed subcommands: --params JSON merged with --set key=value.
struct CheckArgs {
  std::string params = "{}";
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--params", params, "check parameters as a JSON object");
    app->add_option("--set", sets, "override one parameter, key=value with a JSON value");
  }
  json resolve() const {
    json p = json::parse(params);
    if (!p.is_object()) throw ConfigError("--params: expected a JSON object");
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set " + kv + ": expected key=value");
      const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      auto v = json::parse(val, nullptr, false);
      p[key] = v.is_discarded() ? json(val) : v;
    }
    return p;
  }
};

int run_kind(const Globals& g, const std::string& kind, const json& params) {
  auto r = run_check(CheckSpec{kind, kind, params}, settings(g));
  write_output(g, r.to_json());
  if (r.status == "error") {
    std::cerr << "error: " << r.error << '\n';
    return 2;
  }
  return r.pass() ? 0 : 1;
}

struct Plane {
  BoundaryPtr E;
  GridPtr g;
  ConeContext ctx;
};

Plane plane(const Globals& gl, int k_max, double reach) {
  Plane p;
  p.E = scenario_boundary(boundary_json(gl.boundary));
  if (!dynamic_cast<const HyperplaneBoundary*>(p.E.get()))
    throw ConfigError("boundary: cone functionals run on a hyperplane");
  GridOptions go;
  go.seed = gl.seed.value_or(0);
  const int n = p.E->dim();
  go.window = Box{Point(Point::Constant(n, -2.0)), Point(Point::Constant(n, 2.0))};
  p.g = build_grid(p.E, 0, k_max, go);
  RegionOptions ro;
  ro.wq.paper_constants = gl.paper_constants;
  p.ctx = cone_context(p.g, reach, ro, true);
  return p;
}

CubeRef cube_at(const DyadicGrid& g, const Point& x, int k) {
  auto q = g.ref_at(x, k);
  if (!q) throw ArgumentError("no generation " + std::to_string(k) + " cube contains the point");
  return *q;
}

json whitney_cube_json(const WhitneyCube& I) {
  return {{"k", I.k}, {"center", point_json(I.center())}, {"side", I.side()}, {"exterior", I.exterior}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rectilab: numerical laboratory for uniformly rectifiable boundaries"};
  app.require_subcommand(1);
  Globals gl;
  std::uint64_t seed = 0;
  int workers = 0;
  app.add_option("--seed", seed, "master seed")->each([&](const std::string&) { gl.seed = seed; });
  app.add_option("--workers", workers, "worker threads (overrides RECTILAB_WORKERS)")->each([&](const std::string&) {
    gl.workers = workers;
  });
  app.add_flag("--paper-constants", gl.paper_constants, "use the literal constants instead of the practical defaults");
  app.add_option("--out", gl.out, "output file (run: output directory)");
  app.add_option("--boundary", gl.boundary, "boundary name, JSON description or file");
  app.fallthrough();

  int code = 0;
  auto guard = [&](auto&& f) {
    return [&code, f]() {
      try {
        code = f();
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        code = 2;
      }
    };
  };

  // run
  auto* run_cmd = app.add_subcommand("run", "run a scenario file or builtin scenario");
  std::string scenario_arg;
  run_cmd->add_option("scenario", scenario_arg, "scenario JSON file or builtin name")->required();
  run_cmd->callback(guard([&]() {
    std::ifstream probe(scenario_arg);
    Scenario sc = probe ? load_scenario(scenario_arg) : builtin_scenario(scenario_arg);
    if (gl.seed) sc.seed = *gl.seed;
    if (gl.workers || std::getenv("RECTILAB_WORKERS")) sc.workers = resolve_workers(gl.workers);
    if (gl.paper_constants) sc.paper_constants = true;
    if (!gl.out.empty()) sc.out = gl.out;
    auto rep = run(sc);
    if (!sc.out.empty())
      emit(rep, sc.out);
    emit_text(rep, std::cout);
    return rep.ok() ? 0 : 1;
  }));

  auto* list_cmd = app.add_subcommand("list-builtins", "list builtin scenarios, boundaries and check kinds");
  list_cmd->callback(guard([&]() {
    json kinds = json::object();
    for (const auto& k : check_kinds()) kinds[k] = check_defaults(k);
    write_output(gl, {{"scenarios", builtin_names()}, {"boundaries", builtin_boundary_names()}, {"checks", kinds}});
    return 0;
  }));

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "dyadic grids on the boundary");
  grid_cmd->require_subcommand(1);
  int grid_kmin = 0, grid_kmax = 5;
  double grid_half = 2.0;
  auto* grid_build = grid_cmd->add_subcommand("build", "build a grid and print its summary");
  grid_build->add_option("--k-min", grid_kmin);
  grid_build->add_option("--k-max", grid_kmax);
  grid_build->add_option("--window-half", grid_half, "half width of the grid window on unbounded boundaries");
  grid_build->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    GridOptions go;
    go.seed = gl.seed.value_or(0);
    if (!E->bounded()) {
      const int n = E->dim();
      go.window = Box{Point(Point::Constant(n, -grid_half)), Point(Point::Constant(n, grid_half))};
    }
    auto g = build_grid(E, grid_kmin, grid_kmax, go);
    json levels = json::object();
    for (int k = g->k_min(); k <= g->k_max(); ++k) levels[std::to_string(k)] = g->level(k).size();
    const Box w = g->window();
    write_output(gl, {{"cubes", g->size()},
                      {"flat", g->flat()},
                      {"k_min", g->k_min()},
                      {"k_max", g->k_max()},
                      {"window", {{"lo", point_json(w.lo)}, {"hi", point_json(w.hi)}}},
                      {"cubes_per_generation", levels}});
    return 0;
  }));
  auto* grid_stats = grid_cmd->add_subcommand("stats", "verify the grid properties");
  CheckArgs grid_args;
  grid_args.attach(grid_stats);
  grid_stats->callback(guard([&]() { return run_kind(gl, "grid-props", grid_args.resolve()); }));

  // whitney
  auto* wh_cmd = app.add_subcommand("whitney", "Whitney decompositions of the complement");
  wh_cmd->require_subcommand(1);
  auto* wh_build = wh_cmd->add_subcommand("build", "list Whitney cubes meeting a region");
  double wh_half = 1.0, wh_height = 2.0;
  int wh_kstop = 6, wh_limit = 50;
  std::string wh_side = "both";
  wh_build->add_option("--half", wh_half, "half width of the region");
  wh_build->add_option("--height", wh_height, "vertical half extent of the region");
  wh_build->add_option("--k-stop", wh_kstop, "finest generation");
  wh_build->add_option("--side", wh_side, "interior, exterior or both");
  wh_build->add_option("--limit", wh_limit, "cubes listed in the output");
  wh_build->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    const int d = E->ambient_dim();
    Point lo = Point::Constant(d, -wh_half), hi = Point::Constant(d, wh_half);
    lo[d - 1] = -wh_height;
    hi[d - 1] = wh_height;
    const Box region{lo, hi};
    WhitneyDecomposition W(E, region.inflate(4 * wh_half), side_from_string(wh_side));
    auto cubes = W.cubes(region, wh_kstop);
    auto rep = verify_whitney(W, region, wh_kstop);
    json gen = json::object(), list = json::array();
    for (const auto& I : cubes) {
      gen[std::to_string(I.k)] = gen.value(std::to_string(I.k), 0) + 1;
      if (static_cast<int>(list.size()) < wh_limit) list.push_back(whitney_cube_json(I));
    }
    write_output(gl, {{"cubes", cubes.size()},
                      {"per_generation", gen},
                      {"violations_distance", rep.violations_distance},
                      {"violations_neighbor", rep.violations_neighbor},
                      {"min_ratio", rep.min_ratio},
                      {"max_ratio", rep.max_ratio},
                      {"max_neighbor_ratio", rep.max_neighbor_ratio},
                      {"listed", list}});
    return rep.pass() ? 0 : 1;
  }));

  // sawtooth
  auto* saw_cmd = app.add_subcommand("sawtooth", "Carleson boxes and sawtooth regions");
  saw_cmd->require_subcommand(1);
  auto* saw_build = saw_cmd->add_subcommand("build", "build a region and report its Whitney members");
  std::string saw_family = "carleson", saw_x = "0,0,0", saw_cubes;
  int saw_k = 1, saw_kstop = 4, saw_N = 3;
  double saw_r = 0.1;
  saw_build->add_option("--family", saw_family, "carleson, carleson-doubled, ball, sawtooth or approx")->required();
  saw_build->add_option("--x", saw_x, "boundary point (carleson, ball)");
  saw_build->add_option("--k", saw_k, "cube generation (carleson)");
  saw_build->add_option("--r", saw_r, "radius (ball)");
  saw_build->add_option("--N", saw_N, "generation of the family (approx)");
  saw_build->add_option("--cubes", saw_cubes, "family for sawtooth: k:x,y,z;k:x,y,z");
  saw_build->add_option("--k-stop", saw_kstop, "finest member generation reported");
  saw_build->callback(guard([&]() {
    Plane P = plane(gl, std::max({saw_kstop, saw_k, saw_N}) + 2, 16);
    RegionOptions ro;
    ro.wq.paper_constants = gl.paper_constants;
    const Point x = parse_point(saw_x);
    std::optional<SawtoothDomain> D;
    if (saw_family == "carleson" || saw_family == "carleson-doubled") {
      D.emplace(carleson_box(P.g, P.ctx.W, cube_at(*P.g, x, saw_k), ro, saw_family == "carleson-doubled"));
    } else if (saw_family == "ball") {
      D.emplace(carleson_box_ball(P.g, P.ctx.W, x, saw_r, ro));
    } else if (saw_family == "approx") {
      D.emplace(approx_domain(P.g, P.ctx.W, saw_N, ro));
    } else if (saw_family == "sawtooth") {
      std::vector<CubeRef> F;
      std::stringstream ss(saw_cubes);
      std::string tok;
      while (std::getline(ss, tok, ';')) {
        const auto c = tok.find(':');
        if (c == std::string::npos) throw ArgumentError("--cubes: expected k:x,y,z entries");
        F.push_back(cube_at(*P.g, parse_point(tok.substr(c + 1)), std::stoi(tok.substr(0, c))));
      }
      if (F.empty()) throw ArgumentError("--cubes: empty family");
      D.emplace(sawtooth(P.g, P.ctx.W, F, std::nullopt, ro));
    } else {
      throw ArgumentError("--family: unknown family '" + saw_family + "'");
    }
    auto members = D->members(saw_kstop);
    json gen = json::object();
    for (const auto& I : members) gen[std::to_string(I.k)] = gen.value(std::to_string(I.k), 0) + 1;
    const Box reach = D->reach();
    write_output(gl, {{"kind", to_string(D->kind())},
                      {"members", members.size()},
                      {"per_generation", gen},
                      {"dilation", D->dilation()},
                      {"reach", {{"lo", point_json(reach.lo)}, {"hi", point_json(reach.hi)}}}});
    return 0;
  }));

  // approx
  auto* approx_cmd = app.add_subcommand("approx", "polyhedral approximating domain Omega_N");
  int approx_N = 3;
  approx_cmd->add_option("--N", approx_N, "generation of the approximating family")->required();
  approx_cmd->callback(guard([&]() {
    Plane P = plane(gl, approx_N + 2, 16);
    RegionOptions ro;
    ro.wq.paper_constants = gl.paper_constants;
    auto B = approx_boundary(P.g, P.ctx.W, approx_N, ro);
    const Box w = B->window();
    write_output(gl, {{"N", approx_N},
                      {"faces", B->faces().size()},
                      {"area", B->total_area()},
                      {"diameter", B->diameter()},
                      {"window", {{"lo", point_json(w.lo)}, {"hi", point_json(w.hi)}}}});
    return 0;
  }));

  // connectivity
  auto* con_cmd = app.add_subcommand("connectivity", "corkscrews and Harnack chains");
  con_cmd->require_subcommand(1);
  std::string con_x = "0,0,0", con_Y = "0.5,0,0.5", con_side = "interior", con_scales = "0.1,0.5,1";
  double con_r = 1, con_rho = 0.25, con_Lambda = 8;
  auto* cork = con_cmd->add_subcommand("corkscrew", "corkscrew point of B(x, r)");
  cork->add_option("--x", con_x);
  cork->add_option("--r", con_r);
  cork->add_option("--side", con_side);
  cork->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    CorkscrewOptions o;
    o.seed = gl.seed.value_or(0);
    auto c = corkscrew(*E, parse_point(con_x), con_r, side_from_string(con_side), o);
    write_output(gl, {{"x", point_json(c.x)}, {"r", c.r}, {"X", point_json(c.X)}, {"c", c.c}, {"certified", c.certified}});
    return c.certified ? 0 : 1;
  }));
  auto* chain = con_cmd->add_subcommand("chain", "Harnack chain from X to Y");
  chain->add_option("--X", con_x);
  chain->add_option("--Y", con_Y);
  chain->add_option("--rho", con_rho);
  chain->add_option("--Lambda", con_Lambda);
  chain->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    auto h = harnack_chain(*E, parse_point(con_x), parse_point(con_Y), con_rho, con_Lambda);
    auto v = verify_chain(*E, h);
    json balls = json::array();
    for (const auto& b : h.balls) balls.push_back({{"center", point_json(b.center)}, {"radius", b.radius}});
    write_output(gl, {{"length", h.size()}, {"ratio", h.ratio}, {"verified", v.pass()}, {"balls", balls}});
    return v.pass() ? 0 : 1;
  }));
  auto* diag = con_cmd->add_subcommand("diag", "corkscrew constants and chain lengths over scales");
  diag->add_option("--x", con_x);
  diag->add_option("--scales", con_scales);
  diag->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    write_output(gl, nta_diagnostics(*E, parse_point(con_x), parse_list(con_scales)).to_json());
    return 0;
  }));

  // potential
  auto* pot_cmd = app.add_subcommand("potential", "layer potentials and singular integrals");
  pot_cmd->require_subcommand(1);
  std::string pot_X = "0,0,1", pot_eps = "0.25,0.5,1", pot_x = "0,0,0";
  int pot_order = 2, pot_kstop = 8;
  double pot_r = 0.5, pot_h = 0.1, pot_tau = 24.0;
  auto* slayer = pot_cmd->add_subcommand("slayer", "single layer of the unit density and its derivatives");
  slayer->add_option("--X", pot_X);
  slayer->add_option("--order", pot_order);
  slayer->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    LayerOptions lo;
    lo.seed = gl.seed.value_or(0);
    auto v = single_layer(*E, Density::one(), parse_point(pot_X), pot_order, lo);
    json h = json::array();
    for (Eigen::Index i = 0; i < v.hessian.rows(); ++i)
      for (Eigen::Index j = 0; j < v.hessian.cols(); ++j) h.push_back(v.hessian(i, j));
    write_output(gl, {{"value", v.value},
                      {"gradient", pot_order >= 1 ? point_json(v.gradient) : json()},
                      {"hessian", pot_order >= 2 ? h : json()},
                      {"err_est", v.err_est}});
    return 0;
  }));
  auto* carl = pot_cmd->add_subcommand("carleson", "int_B |grad^2 S 1|^2 dist(X, E) dX / r^n");
  carl->add_option("--x", pot_x);
  carl->add_option("--r", pot_r);
  carl->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    CarlesonOptions o;
    o.workers = resolve_workers(gl.workers);
    o.layer.seed = gl.seed.value_or(0);
    write_output(gl, carleson_ur_functional(*E, Ball{parse_point(pot_x), pot_r}, o).to_json());
    return 0;
  }));
  auto* sio = pot_cmd->add_subcommand("sio", "truncated Riesz transform norms over eps");
  sio->add_option("--eps", pot_eps);
  sio->add_option("--spacing", pot_h, "sample spacing");
  sio->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    SioOptions o;
    o.h = pot_h;
    o.seed = gl.seed.value_or(0);
    o.workers = resolve_workers(gl.workers);
    write_output(gl, sio_sup_check(*E, CZKernel{E->ambient_dim()}, Density::one(), parse_list(pot_eps), o).to_json());
    return 0;
  }));
  auto* ntm = pot_cmd->add_subcommand("ntmax", "non-tangential maximum of |grad S 1| at x");
  ntm->add_option("--x", pot_x);
  ntm->add_option("--tau", pot_tau);
  ntm->add_option("--k-stop", pot_kstop);
  ntm->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    const Point x = parse_point(pot_x);
    Box win{x, x};
    WhitneyDecomposition W(E, win.inflate(8 * pot_tau + 8), Side::Both);
    SingleLayer S(*E, Density::one());
    auto F = [&](const Point& X) { return S.gradient(X).norm(); };
    write_output(gl, {{"x", point_json(x)}, {"tau", pot_tau}, {"k_stop", pot_kstop},
                      {"value", nt_max(F, W, x, pot_tau, pot_kstop)}});
    return 0;
  }));

  // harmonic measure
  auto* hm_cmd = app.add_subcommand("hm", "harmonic measure, Poisson kernel and Green function");
  hm_cmd->require_subcommand(1);
  std::string hm_X = "0,0,1", hm_y = "0,0,0", hm_Y = "0.5,0,1.5";
  double hm_r = 0.5, hm_c = 0.5;
  std::size_t hm_walks = 100000;
  auto* omega = hm_cmd->add_subcommand("omega", "omega^X(Delta(y, r)) by walk on spheres");
  auto* kernel = hm_cmd->add_subcommand("kernel", "Poisson kernel k^X(y)");
  auto* green = hm_cmd->add_subcommand("green", "G(X, Y) and its symmetry");
  auto* hdiag = hm_cmd->add_subcommand("diag", "Bourgain, CFMS and doubling diagnostics at Delta(y, r)");
  for (auto* c : {omega, kernel, green, hdiag}) c->add_option("--walks", hm_walks);
  for (auto* c : {omega, kernel, green}) c->add_option("--X", hm_X);
  for (auto* c : {omega, kernel, hdiag}) c->add_option("--y", hm_y);
  for (auto* c : {omega, kernel, hdiag}) c->add_option("--r", hm_r);
  green->add_option("--Y", hm_Y);
  hdiag->add_option("--c", hm_c, "Bourgain corkscrew fraction");
  omega->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    auto m = wos_harmonic_measure(*E, parse_point(hm_X), SurfaceBall{parse_point(hm_y), hm_r}, walk_config(gl, hm_walks));
    write_output(gl, m.to_json());
    return 0;
  }));
  kernel->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    auto k = poisson_density(*E, parse_point(hm_X), parse_point(hm_y), hm_r, walk_config(gl, hm_walks));
    write_output(gl, k.to_json());
    return 0;
  }));
  green->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    auto s = green_symmetry(*E, parse_point(hm_X), parse_point(hm_Y), walk_config(gl, hm_walks));
    write_output(gl, s.to_json());
    return s.pass ? 0 : 1;
  }));
  hdiag->callback(guard([&]() {
    auto E = scenario_boundary(boundary_json(gl.boundary));
    const auto cfg = walk_config(gl, hm_walks);
    const Point y = parse_point(hm_y);
    const SurfaceBall D{y, hm_r};
    auto cs = corkscrew(*E, y, 16 * hm_r);
    auto b = bourgain_check(*E, y, hm_r, hm_c, cfg);
    auto cf = cfms_check(*E, D, cs.X, cfg);
    auto db = doubling_check(*E, D, cs.X, cfg);
    write_output(gl, {{"pole", point_json(cs.X)}, {"bourgain", b.to_json()}, {"cfms", cf.to_json()},
                      {"doubling", db.to_json()}});
    return cf.pass && db.pass ? 0 : 1;
  }));

  // functionals
  auto* fn_cmd = app.add_subcommand("func", "cone functionals and harmonic measure estimates");
  fn_cmd->require_subcommand(1);
  std::string fn_x = "0.1,0.1,0", fn_cone = "gamma";
  int fn_k = 1, fn_kstop = 4, fn_kmax = 6, fn_sub = 0;
  auto* fsq = fn_cmd->add_subcommand("square", "S u(x) for u(X) = t on the cone at x");
  auto* fnt = fn_cmd->add_subcommand("ntmax", "N u(x) for u(X) = t on the cone at x");
  for (auto* c : {fsq, fnt}) {
    c->add_option("--x", fn_x, "apex on the plane");
    c->add_option("--k", fn_k, "generation of the top cube Q0");
    c->add_option("--k-stop", fn_kstop, "truncation generation");
    c->add_option("--cone", fn_cone, "gamma, gamma-tilde, lambda, lambda-ext or lambda-two-sided");
    c->add_option("--sub", fn_sub, "cell subdivisions per Whitney cube");
  }
  auto cone_value = [&](bool square) {
    return [&, square]() {
      Plane P = plane(gl, std::max(fn_kmax, fn_kstop + 2), 16);
      const Point x = parse_point(fn_x);
      const CubeRef Q0 = cube_at(*P.g, x, fn_k);
      DyadicCone cone(P.ctx, Q0, x, cone_variant_from_string(fn_cone), fn_kstop);
      auto u = HarmonicField::coordinate(P.E->ambient_dim() - 1, P.E->ambient_dim());
      const double v = square ? square_function(u, cone, fn_sub) : nt_max(u, cone, std::max(fn_sub, 1));
      write_output(gl, {{square ? "square_function" : "nt_max", v}, {"cone", cone.to_json()}});
      return 0;
    };
  };
  fsq->callback(guard(cone_value(true)));
  fnt->callback(guard(cone_value(false)));

  const std::vector<std::pair<std::string, std::string>> check_cmds = {
      {"goodlambda", "good-lambda"}, {"rh", "rh"}, {"ainfty", "ainfty"}, {"tb", "tb"}, {"ntgreen", "nt-green"}};
  std::vector<CheckArgs> fn_args(check_cmds.size());
  for (std::size_t i = 0; i < check_cmds.size(); ++i) {
    auto* c = fn_cmd->add_subcommand(check_cmds[i].first, "run the " + check_cmds[i].second + " check");
    fn_args[i].attach(c);
    const std::string kind = check_cmds[i].second;
    c->callback(guard([&, i, kind]() { return run_kind(gl, kind, fn_args[i].resolve()); }));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  return code;
}
