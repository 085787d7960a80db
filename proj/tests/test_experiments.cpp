#include <doctest.h>

#include "rectilab/experiments.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace rectilab;
using nlohmann::json;

namespace {

json small_scenario(std::uint64_t seed) {
  return {{"version", 1},
          {"name", "small"},
          {"seed", seed},
          {"checks",
           {{{"id", "g"}, {"kind", "green"}, {"params", {{"walks", 2000}}}},
            {{"id", "w"}, {"kind", "wos"}, {"params", {{"walks", 2000}, {"max_stderr", 5e-2}}}}}}};
}

std::string csv_of(const RunReport& r) {
  std::ostringstream os;
  emit_csv(r, os);
  return os.str();
}

std::string config_error(const json& j) {
  try {
    Scenario::from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("scenario schema rejects bad input with a path") {
  json j = small_scenario(0);
  j["checks"][0]["params"]["bogus"] = 1;
  CHECK(config_error(j).find("scenario.checks[0].params.bogus") != std::string::npos);

  j = small_scenario(0);
  j["extra"] = true;
  CHECK(config_error(j).find("scenario.extra") != std::string::npos);

  j = small_scenario(0);
  j.erase("version");
  CHECK(config_error(j).find("scenario.version") != std::string::npos);

  j = small_scenario(0);
  j["checks"][0]["params"]["walks"] = "many";
  CHECK(config_error(j).find("scenario.checks[0].params.walks") != std::string::npos);

  j = small_scenario(0);
  j["checks"][1]["id"] = "g";
  CHECK(config_error(j).find("duplicate") != std::string::npos);

  j = small_scenario(0);
  j["whitney"] = {{"lambda", 0.3}};
  CHECK(config_error(j).find("scenario.whitney.lambda") != std::string::npos);

  CHECK_FALSE(config_error({{"version", 1}, {"checks", {{{"kind", "no-such-check"}}}}}).empty());
}

TEST_CASE("exponents p, q <= 1 are rejected") {
  CHECK(config_error({{"version", 1}, {"checks", {{{"kind", "rh"}, {"params", {{"p", 1.0}}}}}}})
            .find("scenario.checks[0].params.p") != std::string::npos);
  CHECK_FALSE(config_error({{"version", 1}, {"checks", {{{"kind", "nt-green"}, {"params", {{"q", 0.5}}}}}}}).empty());
  auto r = run_check({"rh", "rh", {{"p", 1.0}}}, RunSettings{});
  CHECK(r.status == "error");
  CHECK(r.error.find("exponent") != std::string::npos);
}

TEST_CASE("unknown check kind is captured as an error") {
  auto r = run_check({"x", "no-such-check", json::object()}, RunSettings{});
  CHECK(r.status == "error");
  CHECK_FALSE(r.pass());
}

TEST_CASE("empty scenario gives an empty passing report") {
  auto s = Scenario::from_json({{"version", 1}});
  auto rep = run(s);
  CHECK(rep.checks.empty());
  CHECK(rep.ok());
  CHECK(csv_of(rep) == "check_id,scale,lhs,rhs,constant,stderr,pass\n");
}

TEST_CASE("scenario round trip through JSON") {
  auto s = Scenario::from_json(small_scenario(7));
  auto t = Scenario::from_json(s.to_json());
  CHECK(t.to_json() == s.to_json());
  CHECK(t.checks.size() == 2);
  CHECK(t.checks[0].params["k_sigma"].get<double>() == 3.0);
}

TEST_CASE("runs are reproducible from the seed and the CSV is well formed") {
  auto a = run(Scenario::from_json(small_scenario(11)));
  auto b = run(Scenario::from_json(small_scenario(11)));
  auto c = run(Scenario::from_json(small_scenario(12)));
  const std::string ca = csv_of(a);
  CHECK(ca == csv_of(b));
  CHECK(ca != csv_of(c));

  std::istringstream is(ca);
  std::string line;
  std::getline(is, line);
  CHECK(line == "check_id,scale,lhs,rhs,constant,stderr,pass");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
    CHECK((line.rfind("g/", 0) == 0 || line.rfind("w/", 0) == 0));
  }
  CHECK(rows >= 2);
  for (const auto& r : a.checks) CHECK(r.inputs["seed"].get<std::uint64_t>() == 11);
}

TEST_CASE("emit writes the three report files") {
  const auto dir = std::filesystem::temp_directory_path() / "rectilab_emit_test";
  std::filesystem::remove_all(dir);
  auto rep = run(Scenario::from_json({{"version", 1}}));
  emit(rep, dir.string());
  for (const char* f : {"report.json", "report.csv", "report.txt"}) CHECK(std::filesystem::exists(dir / f));
  std::filesystem::remove_all(dir);
}

TEST_CASE("builtin scenarios parse") {
  auto names = builtin_names();
  CHECK(std::find(names.begin(), names.end(), "halfspace-acceptance") != names.end());
  CHECK(std::find(names.begin(), names.end(), "halfspace-smoke") != names.end());
  for (const auto& n : names) {
    auto s = builtin_scenario(n);
    CHECK_FALSE(s.checks.empty());
    CHECK_NOTHROW(Scenario::from_json(s.to_json()));
  }
  CHECK_THROWS(builtin_scenario("nope"));
  CHECK(builtin_scenario("halfspace-acceptance").checks.size() == 11);
}

TEST_CASE("worker count: flag, then environment") {
  ::setenv("RECTILAB_WORKERS", "3", 1);
  CHECK(resolve_workers(std::nullopt) == 3);
  CHECK(resolve_workers(5) == 5);
  ::setenv("RECTILAB_WORKERS", "many", 1);
  CHECK_THROWS_AS(resolve_workers(std::nullopt), ConfigError);
  ::unsetenv("RECTILAB_WORKERS");
  CHECK(resolve_workers(std::nullopt) == 0);
}

TEST_CASE("scenario boundaries") {
  CHECK(scenario_boundary("plane")->ambient_dim() == 3);
  CHECK_THROWS(scenario_boundary("no-such-boundary"));
}
