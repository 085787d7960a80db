#pragma once

#include "rectilab/whitney.hpp"

namespace rectilab {

struct CorkscrewOptions {
  double c_min = 0.05;
  int directions = 64;  ///< ray directions besides the coordinate axes
  int certify_samples = 64;
  std::uint64_t seed = 0;
};

struct CorkscrewResult {
  Point x;
  double r = 0;
  Point X;
  double c = 0;  ///< B(X, c r) inside B(x, r) cap (domain side)
  Side side = Side::Interior;
  bool certified = false;
};

/// Largest c with B(X, c r) inside B(x, r) and on the given side of E.
double corkscrew_constant(const BoundaryModel& E, const Point& X, const Point& x, double r, Side side);

CorkscrewResult corkscrew(const BoundaryModel& E, const Point& x, double r, Side side = Side::Interior,
                          const CorkscrewOptions& opt = {});

struct ChainBall {
  Point center;
  double radius = 0;
};

struct HarnackChain {
  Point X, Y;
  std::vector<ChainBall> balls;
  std::vector<WhitneyCube> route;  ///< Whitney cubes visited by the path search
  double ratio = 0;                ///< achieved C: C^-1 diam <= dist(B, E) <= C diam

  std::size_t size() const { return balls.size(); }
};

struct ChainOptions {
  std::size_t max_nodes = 400000;
  int window_growth = 4;  ///< retries with doubled search windows
};

/// Chain of balls in Omega from X to Y. Throws PreconditionError when
/// delta(X), delta(Y) < rho or |X - Y| > Lambda rho, ConnectivityError when no
/// path is found.
HarnackChain harnack_chain(const BoundaryModel& E, const Point& X, const Point& Y, double rho, double Lambda,
                           const ChainOptions& opt = {});

struct ChainCheck {
  bool endpoints = false;
  bool linked = false;
  bool inside = false;
  double ratio = 0;
  bool pass() const { return endpoints && linked && inside; }
};
/// Independent re-check of a chain.
ChainCheck verify_chain(const BoundaryModel& E, const HarnackChain& h);

struct CubeCorkscrew {
  Point X;
  WhitneyCube cube;
  double delta_ratio = 0;  ///< delta(X_Q) / diam Q
  double dist_ratio = 0;   ///< dist(X_Q, Q) / diam Q
};

/// X_Q: centre of the interior Whitney cube near Q whose generation is closest
/// to k(Q), nearest to x_Q among those.
CubeCorkscrew cube_corkscrew(const DyadicGrid& g, const WhitneyDecomposition& W, const CubeRef& Q,
                             const WqOptions& opt = {});

struct NtaRow {
  double scale = 0;
  double c = 0;
  bool corkscrew_ok = false;
  std::vector<std::pair<double, long>> chain_lengths;  ///< (Lambda, N), N = -1 on failure
};

struct NtaReport {
  std::vector<NtaRow> rows;
  double c_min = kInf;
  nlohmann::json to_json() const;
};

NtaReport nta_diagnostics(const BoundaryModel& E, const Point& x, const std::vector<double>& scales,
                          const std::vector<double>& lambdas = {2, 4, 8});

}  // namespace rectilab
