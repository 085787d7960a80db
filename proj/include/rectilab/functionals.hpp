#pragma once

#include "rectilab/harmonic.hpp"
#include "rectilab/sawtooth.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <tuple>

namespace rectilab {

// ---------------------------------------------------------------------------
// Reports

struct SweepRow {
  double scale = 0;
  double lhs = 0;
  double rhs = 0;
  double constant = 0;
  double std_err = 0;
  bool pass = true;
};

struct FunctionalReport {
  std::string id;
  double lhs = 0, rhs = 0;
  double constant = 0;
  double tolerance = 0;
  double std_err = 0;
  bool pass = false;
  std::vector<SweepRow> sweep;
  std::vector<std::string> flags;
  nlohmann::json extra = nlohmann::json::object();

  void flag(const std::string& f);
  nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Cube helpers shared by the functionals

double cube_sigma(const DyadicGrid& g, const CubeRef& Q);
/// Q inside Delta(x_Q, outer).
double cube_outer_radius(const DyadicGrid& g, const CubeRef& Q);
bool in_cube(const DyadicGrid& g, const CubeRef& Q, const Point& y);
/// Boundary quadrature on Q with spacing about h (sampled grids return members).
WeightedCloud cube_nodes(const DyadicGrid& g, const CubeRef& Q, double h);

// ---------------------------------------------------------------------------
// Cones

enum class ConeVariant { Gamma, GammaTilde, Lambda, LambdaExt, LambdaTwoSided };
std::string to_string(ConeVariant v);
ConeVariant cone_variant_from_string(const std::string& s);

struct ConeContext {
  GridPtr g;
  WhitneyPtr W;     ///< interior decomposition
  WhitneyPtr Wext;  ///< exterior decomposition; needed by the Lambda-ext and two-sided cones
  RegionOptions region;
};

/// Grid plus interior and exterior Whitney decompositions over grid window + reach.
ConeContext cone_context(GridPtr g, double reach, const RegionOptions& region = {}, bool exterior = true);

/// W_Q lists shared between cones.
class WqCache {
 public:
  explicit WqCache(const ConeContext& ctx) : ctx_(&ctx) {}
  std::shared_ptr<const std::vector<WhitneyCube>> get(const CubeRef& Q, bool exterior) const;

 private:
  const ConeContext* ctx_;
  mutable std::mutex mu_;
  mutable std::map<std::tuple<bool, int, std::vector<double>>, std::shared_ptr<const std::vector<WhitneyCube>>> map_;
};

struct ConeCell {
  Point X;
  double vol = 0;
  int level = 0;  ///< generation of the coarsest Q whose W_Q supplies the cell
};

/// Union over x in Q, Q in D_{Q0}, k(Q) <= k_stop of W_Q (fattened for Gamma by lambda,
/// Gamma-tilde by 2 lambda).
class DyadicCone {
 public:
  DyadicCone(const ConeContext& ctx, const CubeRef& Q0, const Point& x, ConeVariant v, int k_stop,
             const WqCache* cache = nullptr);

  ConeVariant variant() const { return v_; }
  const ConeContext& context() const { return *ctx_; }
  const CubeRef& base() const { return Q0_; }
  const Point& apex() const { return x_; }
  int k_stop() const { return k_stop_; }
  const std::vector<WhitneyCube>& cubes() const { return cubes_; }
  /// k(Q) of the coarsest Q through which each cube entered.
  const std::vector<int>& levels() const { return levels_; }
  double dilation() const { return dil_; }
  Box box(std::size_t i) const;
  bool contains(const Point& X) const;
  /// 2^{sub d} midpoint cells per member box, weighted by 1 / multiplicity on overlaps.
  std::vector<ConeCell> cells(int sub) const;
  /// max |X - c| over the realized region.
  double reach(const Point& c) const;
  nlohmann::json to_json() const;

 private:
  const BoxTree& tree() const;

  const ConeContext* ctx_;
  CubeRef Q0_;
  Point x_;
  ConeVariant v_;
  int k_stop_;
  double dil_ = 1;
  std::vector<WhitneyCube> cubes_;
  std::vector<int> levels_;
  mutable std::once_flag tree_once_;
  mutable std::unique_ptr<BoxTree> tree_;
};

// ---------------------------------------------------------------------------
// Harmonic fields

struct HarmonicField {
  std::string name;
  std::function<double(const Point&)> u;
  std::function<Point(const Point&)> grad;
  std::optional<Point> pole;
  bool low_confidence = false;
  nlohmann::json meta = nlohmann::json::object();

  static HarmonicField constant(double c);
  /// u(X) = X_axis.
  static HarmonicField coordinate(int axis, int d);
};

/// Kernel smoothing of exits near a point of a flat boundary.
struct ExitSmoothing {
  Point center;
  double radius = 0;  ///< half width of the smoothed zone; 0 keeps point masses
  double beta = 0;    ///< biweight bandwidth
  double panel = 0;   ///< panel side (0: beta / 16)
};

/// Single layer of sum_i w(z_i) delta_{z_i} / N over the exits of a sample. On
/// hyperplanes the exits in the smoothed zone are spread onto panels.
class ExitLayer {
 public:
  ExitLayer(const BoundaryModel& E, const ExitSample& s, const std::function<double(const Point&)>& w,
            const ExitSmoothing& sm = {}, const LayerOptions& opt = {});
  LayerValue evaluate(const Point& X, int order) const { return S_->evaluate(X, order); }
  bool smoothed() const { return smoothed_; }
  std::size_t panels() const { return S_->panels(); }

 private:
  std::unique_ptr<SingleLayer> S_;
  bool smoothed_ = false;
};

/// u(Y) = d/dY_j G(Y, P) from exits of walks started at P.
HarmonicField green_derivative_field(const BoundaryModel& E, const Point& P, int j, const WalkConfig& cfg,
                                     const ExitSmoothing& sm = {});
/// Same field from an existing sample of exits from the pole.
HarmonicField green_derivative_field(const BoundaryModel& E, std::shared_ptr<const ExitSample> s, int j,
                                     const ExitSmoothing& sm = {});

struct HarmonicityProbe {
  std::size_t probes = 0;
  double worst = 0;  ///< max |Laplacian| / (|Hessian| + floor)
  bool pass = false;
};
/// Finite-difference Laplacian of u at the probes against its Hessian.
HarmonicityProbe check_harmonic(const HarmonicField& u, const std::vector<Point>& probes, double h, double tol = 1e-2);

// ---------------------------------------------------------------------------
// Square functions and maximal functions

/// (sum over cone cells |grad u|^2 delta^{1-n} vol)^{1/2}; cells of generation
/// level <= k_trunc only when given. Throws ArgumentError when the pole lies in the cone.
double square_function(const HarmonicField& u, const DyadicCone& cone, int sub = 0,
                       std::optional<int> k_trunc = std::nullopt);
/// sup |u| over the cone cells.
double nt_max(const HarmonicField& u, const DyadicCone& cone, int sub = 1, std::optional<int> k_trunc = std::nullopt);
/// sup over Q in D_{Q0} containing x, k(Q) <= k_stop, of the average of |f| on Q.
double dyadic_max(const std::function<double(const Point&)>& f, const DyadicGrid& g, const CubeRef& Q0, const Point& x,
                  int k_stop, int nodes_per_side = 8);

struct ConeSweepOptions {
  int depth = 2;           ///< truncations k(Q0) .. k(Q0) + depth
  int apexes = 4;          ///< apex grid per side of Q0
  int sub_square = 0;
  int sub_nt = 0;
  ConeVariant square_cone = ConeVariant::Gamma;
  ConeVariant nt_cone = ConeVariant::GammaTilde;
  int workers = 0;
};

struct ApexValues {
  Point x;
  double weight = 0;
  std::vector<double> S;  ///< per truncation
  std::vector<double> N;
};

/// S^k u and N^k u at the apex nodes of Q0, the field evaluated once per distinct cell.
std::vector<ApexValues> cone_sweep(const HarmonicField& u, const ConeContext& ctx, const CubeRef& Q0,
                                   const ConeSweepOptions& opt = {});

/// ||S^k u||_q / ||N u||_q for each truncation k.
FunctionalReport good_lambda_experiment(const HarmonicField& u, const ConeContext& ctx, const CubeRef& Q0, double q,
                                        const ConeSweepOptions& opt = {}, double stability = 0.2);

// ---------------------------------------------------------------------------
// Local Tb geometry and conditions

struct TbGeometry {
  CubeRef Q;
  Point x_Q;
  double ell = 0, sigma = 0;
  double kappa0 = 0, kappa1 = 0, c = 0, kappa2 = 0;
  Ball B_tilde, B_hat;
  Point X_hat;
  bool pole_outside = false;  ///< X_hat outside 6 B_tilde

  /// Radial C^2 cutoff: 1 on 4 B_hat, 0 outside 5 B_hat.
  double eta(const Point& y) const;
  nlohmann::json to_json() const;
};

TbGeometry tb_geometry(const ConeContext& ctx, const CubeRef& Q);

struct TbOptions {
  double q = 2;
  WalkConfig walks;                 ///< stored exits for (a), (c) and the exterior bound
  std::size_t count_walks = 0;      ///< streamed walks for (b); 0 uses walks.walks
  int depth = 1;                    ///< cones down to k(Q) + depth
  int apexes = 4;
  int sub = 0;
  double beta_fraction = 1.0 / 6;   ///< smoothing bandwidth / delta(X_hat)
  double cell_fraction = 1.0 / 8;   ///< partition cells for (a), relative to the B_hat radius
  std::size_t exterior_samples = 1000;
  double hessian_C = 1.0;
  int workers = 0;
};

struct TbReport {
  TbGeometry geo;
  double q = 2;
  double a = 0, b = 0, b_se = 0, c = 0;
  double A0 = 0;
  double ext_C = 0;  ///< max l(Q) |grad^2 S b_Q| over exterior samples of B_hat
  std::size_t ext_samples = 0;
  bool ext_pass = false;
  std::vector<std::string> flags;

  FunctionalReport report() const;
  nlohmann::json to_json() const;
};

TbReport tb_conditions(const ConeContext& ctx, const CubeRef& Q, const TbOptions& opt = {});

/// ||N_{Q,*} d_j G(., X_hat_Q)||_q^q sigma(Q)^{q-1}.
struct NtGreenOptions {
  WalkConfig walks;
  int depth = 2;
  int apexes = 4;
  int sub = 0;
  double beta_fraction = 1.0 / 6;
  int spot_checks = 10;
  int workers = 0;
};
FunctionalReport nt_green_bound(const ConeContext& ctx, const CubeRef& Q, double q, const NtGreenOptions& opt = {});

// ---------------------------------------------------------------------------
// Reverse Hoelder and A-infinity

/// Cells of side about h covering {y in E : inside(y)} near center, sigma from local samples.
class SurfacePartition {
 public:
  SurfacePartition(const BoundaryModel& E, const Point& center, double radius, double h,
                   std::function<bool(const Point&)> inside = {});

  std::size_t size() const { return sigma_.size(); }
  double sigma(std::size_t c) const { return sigma_[c]; }
  const Point& centroid(std::size_t c) const { return centroid_[c]; }
  double total() const { return total_; }
  /// Cell of y, or -1 when y is outside the region.
  long cell_of(const Point& y) const;
  /// omega-hat per cell (fractions of all walks).
  std::vector<double> masses(const ExitSample& s) const;

 private:
  Point center_;
  double radius_ = 0, h_ = 0;
  std::function<bool(const Point&)> inside_;
  std::vector<double> sigma_;
  std::vector<Point> centroid_;
  double total_ = 0;
  std::vector<Point> pts_;
  std::vector<long> pt_cell_;
  std::unique_ptr<PointCloudBoundary> index_;
};

/// Samples of E within B(x, r) at spacing about h.
WeightedCloud local_samples(const BoundaryModel& E, const Point& x, double r, double h, std::uint64_t seed = 0);

struct RhOptions {
  WalkConfig walks;
  double cell_fraction = 1.0 / 16;  ///< cell side / r
  std::optional<Point> pole;        ///< default: corkscrew of Delta
};

/// int_Delta (k^{X_Delta})^p d sigma * sigma(Delta)^{p-1}.
FunctionalReport rh_check(const BoundaryModel& E, const SurfaceBall& D, double p, const RhOptions& opt = {});

/// Pole X_{Delta0} fixed; rows (s, (avg_Delta k^p)^{1/p} / avg_Delta k) for Delta(y, s) inside Delta0.
FunctionalReport rh_sweep(const BoundaryModel& E, const SurfaceBall& D0, double p, const std::vector<double>& radii,
                          int centres, const RhOptions& opt = {});

struct AinftyFit {
  double theta = 0, C = 0;
  std::size_t sets = 0;
  std::vector<std::pair<double, double>> pairs;  ///< (sigma(F)/sigma(R), omega(F)/omega(R))
};
/// Random unions of cells; theta by least squares of log ratios, C the envelope.
AinftyFit ainfty_fit(const std::vector<double>& sigma, const std::vector<double>& omega, std::size_t sets,
                     std::uint64_t seed);

struct AinftyOptions {
  WalkConfig walks;
  double cell_fraction = 1.0 / 16;
  std::size_t sets = 400;
};
/// Ball variant on Delta with pole X_Delta.
FunctionalReport ainfty_check(const BoundaryModel& E, const SurfaceBall& D, const AinftyOptions& opt = {});
/// Dyadic variant on Q with pole X_Q.
FunctionalReport ainfty_check(const ConeContext& ctx, const CubeRef& Q, const AinftyOptions& opt = {});

}  // namespace rectilab
