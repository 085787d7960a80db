#pragma once

#include "rectilab/whitney.hpp"

namespace rectilab {

/// E(X) = c_n |X|^{1-n} in R^{n+1}, the positive fundamental solution of the
/// Laplacian (-Delta E = delta_0). In the plane (n = 1) E(X) = -log|X| / (2 pi).
struct FundamentalSolution {
  int d = 3;

  double cn() const;
  double value(const Point& X) const;
  Point gradient(const Point& X) const;
  Hessian hessian(const Point& X) const;
};

/// Odd Calderon-Zygmund kernel K(x) = x / |x|^{n+1} (vector valued) with the
/// cutoff K_eps(x) = K(x) Phi(|x| / eps).
struct CZKernel {
  enum class Cutoff { Smoothstep, Bump };
  int d = 3;
  Cutoff cutoff = Cutoff::Smoothstep;

  /// Phi: 0 on rho <= 1, 1 on rho >= 2. Smoothstep is the C^2 quintic, Bump a
  /// C-infinity transition built from exp(-1/t).
  double phi(double rho) const;
  Point eval(const Point& x) const;
  Point eval(const Point& x, double eps) const;
  /// Jacobian dK_i / dx_j.
  Hessian jacobian(const Point& x) const;
};

struct KernelBounds {
  double c0 = 0, c1 = 0, c2 = 0;  ///< sup |x|^{n+m} |grad^m K| over the samples
  bool odd = true;
};
KernelBounds kernel_bounds(const CZKernel& K, const std::vector<double>& radii, int directions = 64,
                           std::uint64_t seed = 0);

/// Boundary data for layer potentials.
struct Density {
  std::function<double(const Point&)> f;
  bool constant = false;
  double value = 1.0;

  static Density one() { return {{}, true, 1.0}; }
  static Density uniform(double c) { return {{}, true, c}; }
  static Density of(std::function<double(const Point&)> g) { return {std::move(g), false, 0.0}; }
  double operator()(const Point& x) const { return constant ? value : f(x); }
};

struct LayerOptions {
  double h = 0.05;          ///< panel size for varying data, spacing for sampled boundaries
  double window = 0;        ///< half width of the truncation of an unbounded E (0: 32 around the centre)
  Point center;             ///< centre of the truncation window (default: origin)
  double theta = 0.4;       ///< far-field opening ratio (size / distance)
  int sphere_panels = 41;   ///< panels per cube-face edge; 6 * 41^2 is about 10^4
  double adapt = 2.0;       ///< curved panels are split while distance < adapt * size
  int max_depth = 12;
  std::uint64_t seed = 0;
};

struct LayerValue {
  int order = 0;
  double value = 0;
  Point gradient;
  Hessian hessian;
  double err_est = 0;
};

/// S f(X) = int E(X - y) f(y) d sigma(y) by panel quadrature. Flat pieces (planes,
/// polyhedral faces, Cantor segments) use closed-form panel integrals of
/// piecewise-constant data; spheres use adaptive Gauss panels; anything else is
/// sampled into weighted points.
/// Constant-density flat panel with normal axis, or a point mass when the face is degenerate.
struct PanelSpec {
  Box face;
  int axis = -1;
  double mass = 0;
};

class SingleLayer {
 public:
  SingleLayer(const BoundaryModel& E, Density f, const LayerOptions& opt = {});
  /// Layer of explicit panels; E only supplies distances (margin 0).
  SingleLayer(const BoundaryModel& E, const std::vector<PanelSpec>& panels, const LayerOptions& opt = {});
  ~SingleLayer();
  SingleLayer(SingleLayer&&) noexcept;
  SingleLayer& operator=(SingleLayer&&) noexcept;

  /// Throws ProximityError when delta(X) <= margin().
  LayerValue evaluate(const Point& X, int order) const;
  double value(const Point& X) const { return evaluate(X, 0).value; }
  Point gradient(const Point& X) const { return evaluate(X, 1).gradient; }
  Hessian hessian(const Point& X) const { return evaluate(X, 2).hessian; }

  std::size_t panels() const;
  double margin() const;
  /// int f d sigma over the discretised boundary.
  double mass() const;
  /// int f^2 d sigma.
  double norm2() const;
  const BoundaryModel& boundary() const { return *E_; }

 private:
  struct Impl;
  const BoundaryModel* E_;
  std::unique_ptr<Impl> impl_;
};

LayerValue single_layer(const BoundaryModel& E, const Density& f, const Point& X, int order,
                        const LayerOptions& opt = {});

// ---------------------------------------------------------------------------

struct CarlesonOptions {
  int k_collar = 0;      ///< finest quadrature generation (0: about r / 48)
  int sub = 1;           ///< each quadrature cube is split into 2^{sub d} cells
  double ratio = 1.0;    ///< Whitney ratio of the quadrature cubes
  LayerOptions layer;    ///< layer.window = 0 means 32 r
  Density density = Density::one();
  int workers = 0;
  int refine_steps = 0;  ///< number of refined() calls applied

  /// One refinement step: one generation finer, doubled window, halved h,
  /// doubled sphere resolution.
  CarlesonOptions refined() const;
};

struct CarlesonReport {
  Point x0;
  double r = 0;
  double value = 0;       ///< int_B |grad^2 S f|^2 dist(X, E) dX
  double ratio = 0;       ///< value / r^n
  double richardson = 0;  ///< extrapolated ratio from the last two generations
  double err_est = 0;
  int k_collar = 0;
  int sub = 0;
  double window = 0;
  std::size_t cells = 0;
  std::vector<std::pair<int, double>> by_generation;  ///< ratio contributed per generation

  nlohmann::json to_json() const;
};

CarlesonReport carleson_ur_functional(const BoundaryModel& E, const Ball& B, const CarlesonOptions& opt = {});

struct L2Report {
  double lhs = 0;      ///< int |grad^2 S f|^2 delta over the region
  double rhs = 0;      ///< int |f|^2 d sigma
  double ratio = 0;
  double conical = 0;  ///< int_E int_{Gamma(x)} |grad^2 S f|^2 delta^{1-n}
  double cone_ratio = 0;
  std::size_t cells = 0;

  nlohmann::json to_json() const;
};

/// Vertical and conical forms of the global square-function bound over a box
/// region of R^{n+1} minus E.
L2Report global_l2_check(const BoundaryModel& E, const Density& f, const Box& region, const CarlesonOptions& opt = {});

// ---------------------------------------------------------------------------

struct SioOptions {
  double h = 0.01;  ///< sample spacing
  std::uint64_t seed = 0;
  int workers = 0;
};

/// T_eps f at the samples of E (vector valued).
struct SioField {
  WeightedCloud cloud;
  std::vector<Point> values;
  double eps = 0;
  double norm2 = 0;  ///< int |T_eps f|^2
  double f_norm2 = 0;
};

/// Throws ArgumentError when eps <= 2 h.
SioField truncated_sio(const BoundaryModel& E, const CZKernel& K, const Density& f, double eps,
                       const SioOptions& opt = {});
SioField truncated_sio(const WeightedCloud& cloud, const CZKernel& K, const Density& f, double eps, int workers = 0);

struct SioReport {
  std::vector<std::pair<double, double>> rows;  ///< (eps, |T_eps f|^2 / |f|^2)
  double sup = 0;
  std::size_t samples = 0;

  nlohmann::json to_json() const;
};
SioReport sio_sup_check(const BoundaryModel& E, const CZKernel& K, const Density& f, const std::vector<double>& eps,
                        const SioOptions& opt = {});

// ---------------------------------------------------------------------------

/// Upsilon_tau(x): fattened Whitney cubes I* with dist(I, x) < tau l(I), down to k_stop.
std::vector<WhitneyCube> nontangential_cubes(const WhitneyDecomposition& W, const Point& x, double tau, int k_stop);
std::vector<Box> nontangential_region(const WhitneyDecomposition& W, const Point& x, double tau, int k_stop,
                                      double lambda = 0.05);

/// sup |F| over the cell centres (2^{sub d} per cube) of Upsilon_tau(x).
double nt_max(const std::function<double(const Point&)>& F, const WhitneyDecomposition& W, const Point& x, double tau,
              int k_stop, int sub = 1, double lambda = 0.05);

}  // namespace rectilab
