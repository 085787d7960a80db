#pragma once

#include "rectilab/connectivity.hpp"
#include "rectilab/potential.hpp"

namespace rectilab {

struct WalkConfig {
  double eps_shell = 0;     ///< absorption distance (0: 1e-3 * scale)
  double scale = 0;         ///< reference length (0: delta of the start point)
  int max_steps = 100000;
  std::size_t walks = 100000;
  std::uint64_t seed = 0;
  double kill_factor = 64;  ///< walks leaving B(X, kill_factor * scale) are escaped
  bool fast_paths = true;   ///< exact exit sampling on half-spaces and balls
  int workers = 0;
};

/// Exit points of independent walks from X. With antithetic pairing, walks
/// 2j and 2j+1 share a stream and mirror each other.
struct ExitSample {
  Point X;
  std::vector<Point> exits;
  std::vector<unsigned char> escaped;
  std::size_t n_escaped = 0;
  double eps_shell = 0;
  double mean_steps = 0;
  std::uint64_t seed = 0;
  bool exact = false;
  bool antithetic = false;

  std::size_t size() const { return exits.size(); }
  double escaped_fraction() const { return exits.empty() ? 0.0 : double(n_escaped) / double(exits.size()); }
};

ExitSample sample_exits(const BoundaryModel& E, const Point& X, const WalkConfig& cfg, bool antithetic = false);

struct MeasureEstimate {
  double mean = 0;
  double std_err = 0;
  std::size_t walks = 0;
  double escaped = 0;  ///< escaped-walk fraction
  std::uint64_t seed = 0;
  bool escape_warning = false;  ///< escaped fraction above 1%

  nlohmann::json to_json() const;
};

/// Mean and standard error of a per-walk quantity (pair means when antithetic).
MeasureEstimate walk_average(const ExitSample& s, const std::function<double(std::size_t)>& value);

/// omega^X(target) from a cached sample; escaped walks land nowhere.
MeasureEstimate measure_of(const ExitSample& s, const std::function<bool(const Point&)>& target);
MeasureEstimate measure_of(const ExitSample& s, const SurfaceBall& D);

/// omega^X(target) from walks that are counted and discarded (no sample is kept).
MeasureEstimate count_exits(const BoundaryModel& E, const Point& X, const std::function<bool(const Point&)>& target,
                            const WalkConfig& cfg = {});

MeasureEstimate wos_harmonic_measure(const BoundaryModel& E, const Point& X, const SurfaceBall& D,
                                     const WalkConfig& cfg = {});

struct DensityEstimate {
  double value = 0;
  double std_err = 0;
  double at_s = 0, at_half = 0;  ///< omega / sigma at s and s/2
  double s = 0;
  std::size_t walks = 0;
  bool low_confidence = false;

  nlohmann::json to_json() const;
};

/// k^X(y) by Richardson extrapolation of omega(Delta(y, s)) / sigma(Delta(y, s)) in s.
DensityEstimate poisson_density(const BoundaryModel& E, const ExitSample& s, const Point& y, double radius);
DensityEstimate poisson_density(const BoundaryModel& E, const Point& X, const Point& y, double s,
                                const WalkConfig& cfg = {});

struct GreenEstimate {
  double value = 0;
  double std_err = 0;
  double fundamental = 0;     ///< E(X - Y)
  double boundary_term = 0;   ///< average of E(X - z) over exits z from Y
  std::size_t walks = 0;
  double escaped = 0;

  nlohmann::json to_json() const;
};

/// G(., P) from one cached sample of exits from the pole P:
/// G(X, P) = E(X - P) - avg E(X - z).
class GreenSampler {
 public:
  GreenSampler(const BoundaryModel& E, const Point& pole, const WalkConfig& cfg = {});

  GreenEstimate value(const Point& X) const;
  /// grad_X G(X, P) (harmonic in X away from P).
  Point gradient(const Point& X) const;
  const ExitSample& exits() const { return s_; }
  const Point& pole() const { return P_; }

 private:
  const BoundaryModel* E_;
  Point P_;
  FundamentalSolution G_;
  ExitSample s_;
};

/// Throws ArgumentError when |X - Y| < eps_shell.
GreenEstimate green_function(const BoundaryModel& E, const Point& X, const Point& Y, const WalkConfig& cfg = {});

struct SymmetryReport {
  GreenEstimate xy, yx;
  double diff = 0, std_err = 0;
  bool pass = false;  ///< |G(X,Y) - G(Y,X)| <= 3 stderr
  nlohmann::json to_json() const;
};
SymmetryReport green_symmetry(const BoundaryModel& E, const Point& X, const Point& Y, const WalkConfig& cfg = {});

// ---------------------------------------------------------------------------
// Lemma diagnostics

struct BourgainReport {
  Point x;
  double r = 0, c = 0;
  std::size_t samples = 0;
  double min = 0, min_se = 0;  ///< min over sampled Y of omega^Y(Delta(x, r))
  double C = 0;                ///< 1 / min
  Point X_delta;
  double at_corkscrew = 0, at_corkscrew_se = 0;

  nlohmann::json to_json() const;
};

/// Throws PreconditionError when r >= diam E.
BourgainReport bourgain_check(const BoundaryModel& E, const Point& x, double r, double c, const WalkConfig& cfg = {},
                              int samples = 12);

struct ComparisonReport {
  std::string id;
  double lhs = 0, lhs_se = 0;
  double rhs = 0, rhs_se = 0;
  double ratio = 0, ratio_lo = 0, ratio_hi = 0;  ///< lhs / rhs with a 3 stderr band
  double C = 0;
  bool pass = false;

  nlohmann::json to_json() const;
};

/// omega^X(Delta) against r^{n-1} G(X_Delta, X) for X outside 4B. Pass when the
/// ratio band meets [1/C, C].
ComparisonReport cfms_check(const BoundaryModel& E, const SurfaceBall& D, const Point& X, const WalkConfig& cfg = {},
                            double C = 10);
/// omega^X(2 Delta) / omega^X(Delta) for X outside 4B; pass when the band admits <= C.
ComparisonReport doubling_check(const BoundaryModel& E, const SurfaceBall& D, const Point& X,
                                const WalkConfig& cfg = {}, double C = 4);
/// omega^X(D') / omega^X(D) against omega^{X_D}(D') for D' inside D, X outside 2B.
ComparisonReport pole_change_check(const BoundaryModel& E, const SurfaceBall& Dp, const SurfaceBall& D, const Point& X,
                                   const WalkConfig& cfg = {}, double C = 3);

/// Ratio a / b with a delta-method standard error.
ComparisonReport compare(std::string id, double a, double sa, double b, double sb, double C);

}  // namespace rectilab
