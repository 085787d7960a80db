#pragma once

#include "rectilab/functionals.hpp"

#include <iosfwd>

namespace rectilab {

constexpr int kScenarioVersion = 1;

struct CheckSpec {
  std::string id;
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
};

/// A run description: boundary, grid and Whitney constants, checks, seed.
struct Scenario {
  int version = kScenarioVersion;
  std::string name;
  std::uint64_t seed = 0;
  int workers = 0;
  bool paper_constants = false;
  nlohmann::json boundary = "plane";
  nlohmann::json grid = nlohmann::json::object();     ///< k_min, k_max
  nlohmann::json whitney = nlohmann::json::object();  ///< lambda, c0, m0, reach
  std::vector<CheckSpec> checks;
  std::string out;

  /// Validates against the schema; unknown keys throw ConfigError naming the path.
  static Scenario from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

Scenario load_scenario(const std::string& path);

/// Scenario-wide settings seen by every check.
struct RunSettings {
  std::uint64_t seed = 0;
  int workers = 0;
  bool paper_constants = false;
  nlohmann::json boundary = "plane";
  nlohmann::json grid = nlohmann::json::object();
  nlohmann::json whitney = nlohmann::json::object();
};

struct CheckResult {
  std::string id, kind;
  std::string status;  ///< pass, fail or error
  std::vector<FunctionalReport> reports;
  std::string error;
  double seconds = 0;
  nlohmann::json inputs;  ///< resolved parameters and seed, enough to replay the check

  bool pass() const { return status == "pass"; }
  nlohmann::json to_json() const;
};

struct RunReport {
  std::string scenario;
  std::vector<CheckResult> checks;
  nlohmann::json environment;
  double seconds = 0;

  bool ok() const;
  nlohmann::json to_json() const;
};

/// Registered check kinds with their default parameters.
std::vector<std::string> check_kinds();
nlohmann::json check_defaults(const std::string& kind);

/// Resolves defaults, validates parameters and runs one check. Errors thrown by
/// the check are captured in the result.
CheckResult run_check(const CheckSpec& spec, const RunSettings& settings);

/// Runs every check in dependency order; independent checks continue after failures.
RunReport run(const Scenario& s);

/// check_id, scale, lhs, rhs, constant, stderr, pass at 17 significant digits.
void emit_csv(const RunReport& r, std::ostream& os);
void emit_text(const RunReport& r, std::ostream& os);
/// Writes report.json, report.csv and report.txt into dir; throws IoError.
void emit(const RunReport& r, const std::string& dir);

std::vector<std::string> builtin_names();
Scenario builtin_scenario(const std::string& name);

/// Worker count from the flag, else RECTILAB_WORKERS, else 0 (hardware).
int resolve_workers(std::optional<int> flag);

/// Boundary from a name or JSON description, as accepted in scenarios.
BoundaryPtr scenario_boundary(const nlohmann::json& spec);

}  // namespace rectilab
