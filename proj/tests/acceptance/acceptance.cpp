// Acceptance table: one pass/fail line per criterion. Optional arguments select
// criteria by number; --json prints the full check results afterwards.

#include "rectilab/experiments.hpp"

#include <cstdio>
#include <iostream>
#include <set>
#include <string>

using namespace rectilab;
using nlohmann::json;

namespace {

struct Criterion {
  int number;
  std::string title;
  CheckSpec spec;
};

std::vector<Criterion> criteria() {
  return {
      {1, "flat plane: Carleson ratio <= 1e-3, >= 4x decay per refinement, <= 60 s",
       {"c1", "carleson-flat", {{"max_ratio", 1e-3}, {"min_decay", 4.0}, {"time_limit", 60.0}}}},
      {2, "shell theorem: relative error <= 1e-2 with ~1e4 panels, <= 30 s",
       {"c2", "shell", {{"sphere_panels", 41}, {"tolerance", 1e-2}, {"time_limit", 30.0}}}},
      {3, "walk on spheres: disk within 3 stderr, stderr <= 5e-3 at 1e5 walks; ball centre within 3 stderr; <= 60 s",
       {"c3", "wos", {{"walks", 100000}, {"k_sigma", 3.0}, {"max_stderr", 5e-3}, {"time_limit", 60.0}}}},
      {4, "Green function 1/(6 pi) and symmetry within 3 stderr",
       {"c4", "green", {{"walks", 100000}, {"k_sigma", 3.0}}}},
      {5, "reverse Hoelder p=2: 24/25 within 2e-2, scale invariant within 3 stderr, Omega_N uniform within 2x",
       {"c5",
        "rh",
        {{"p", 2.0},
         {"target", 0.96},
         {"tolerance", 2e-2},
         {"radii", {0.5, 1.0, 2.0}},
         {"k_sigma", 3.0},
         {"approx_levels", {4, 5, 6}},
         {"approx_factor", 2.0}}}},
      {6, "dyadic grids: (i)-(v) without violations up to 1e4 cubes, (vi) band ratio <= 4 tau",
       {"c6", "grid-props", {{"max_cubes", 10000}, {"taus", {0.05, 0.1, 0.2}}, {"c1", 4.0}, {"eta", 1.0}}}},
      {7, "Whitney: distance bounds, fattening overlaps, ball-box and kappa0 containments at 1e4 samples",
       {"c7", "whitney-props", {{"samples", 10000}}}},
      {8, "good-lambda q=2: S/N stable within 20% over 3 generations and truncations (t and Green derivative)",
       {"c8", "good-lambda", {{"q", 2.0}, {"generations", {1, 2, 3}}, {"stability", 0.2}, {"fields", {"t", "green"}}}}},
      {9, "Tb: A0 uniform within 2x over 3 generations, exterior Hessian <= C / l(Q)",
       {"c9", "tb", {{"q", 2.0}, {"generations", {2, 3, 4}}, {"factor", 2.0}, {"hessian_C", 1.0}}}},
      {10, "Cantor contrast m=2..6: Carleson increasing over >= 4 depths, SIO increasing, plane flat within 10%, <= 600 s",
       {"c10",
        "cantor-contrast",
        {{"depths", {2, 3, 4, 5, 6}}, {"min_run", 4}, {"plane_flat", 0.1}, {"time_limit", 600.0}}}},
      {11, "NT-Green bound q=2 uniform within 2x over 3 generations",
       {"c11", "nt-green", {{"q", 2.0}, {"generations", {2, 3, 4}}, {"factor", 2.0}}}},
  };
}

std::string summary(const CheckResult& r) {
  if (r.status == "error") return "error: " + r.error;
  std::string s;
  char buf[160];
  for (const auto& f : r.reports) {
    std::snprintf(buf, sizeof buf, "%s%s lhs=%.4g const=%.4g%s", s.empty() ? "" : "; ", f.id.c_str(), f.lhs,
                  f.constant, f.pass ? "" : " (fail)");
    s += buf;
  }
  std::snprintf(buf, sizeof buf, " [%.1f s]", r.seconds);
  return s + buf;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> pick;
  bool dump = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--json")
      dump = true;
    else
      pick.insert(std::stoi(a));
  }
  RunSettings st;
  st.workers = resolve_workers(std::nullopt);
  int failed = 0;
  json all = json::array();
  for (const auto& c : criteria()) {
    if (!pick.empty() && !pick.count(c.number)) continue;
    auto r = run_check(c.spec, st);
    failed += !r.pass();
    std::cout << "criterion " << c.number << ": " << (r.pass() ? "PASS" : "FAIL") << " - " << c.title << " | "
              << summary(r) << std::endl;
    if (dump) all.push_back(r.to_json());
  }
  if (dump) std::cout << all.dump(2) << '\n';
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
  return failed ? 1 : 0;
}
