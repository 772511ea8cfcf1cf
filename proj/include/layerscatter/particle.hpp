#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <vector>

#include "layerscatter/types.hpp"

namespace layerscatter {

// r(t) = a1 + a2 cos(a3 t),  x(t) = r(t) (cos t, sin t).
struct ShapeParams {
  double a1 = 0.12;
  double a2 = 0.04;
  int a3 = 3;
  cplx kp{2.0};
  int N = 300;

  void validate() const;
  double circumradius() const { return a1 + a2; }
  // FNV-1a over (a1, a2, a3, N).
  std::uint64_t fingerprint() const;
  // True when x (body frame) lies strictly inside the curve.
  bool contains(Vec2 x) const;
};

// Enclosing radius = kEnclosingFactor * circumradius.
inline constexpr double kEnclosingFactor = 1.1;

struct CurvePoint {
  Vec2 pos;
  Vec2 tangent;  // dx/dt
  Vec2 normal;   // unit outward
  double speed;  // |dx/dt|
};

CurvePoint shape_curve(const ShapeParams& shape, double t, double rotation = 0.0);

struct BoundaryDiscretization {
  ShapeParams shape;
  double rotation = 0.0;
  int N = 0;
  double h = 0.0;
  std::vector<Vec2> nodes;
  std::vector<Vec2> normals;
  std::vector<double> speed;

  double arclength() const;
  CurvePoint at(double t) const { return shape_curve(shape, t, rotation); }
};

BoundaryDiscretization discretize_boundary(const ShapeParams& shape, double rotation = 0.0);

// Difference kernels of the Muller system between wavenumbers k2 and kp.
struct MullerKernels {
  cplx S, D, N, T;
};
MullerKernels muller_difference_kernels(cplx k2, cplx kp, Vec2 x, Vec2 nx, Vec2 y, Vec2 ny);

// Unknowns ordered (mu, sigma); block rows are the value and normal-derivative
// transmission conditions.
Eigen::MatrixXcd assemble_muller(const BoundaryDiscretization& boundary, cplx k2, cplx kp);

// Right-hand sides (-u_inc, -du_inc/dn) for u_inc = J_n(k2 r) e^{in theta}, n = -p..p.
Eigen::MatrixXcd incident_mode_rhs(const BoundaryDiscretization& boundary, cplx k2, int p);

struct PrecomputedDensities {
  int p = 0;
  int N = 0;
  Eigen::MatrixXcd mu;     // N x (2p+1), column n + p
  Eigen::MatrixXcd sigma;  // N x (2p+1)
};

PrecomputedDensities factor_and_solve(const Eigen::MatrixXcd& system, const Eigen::MatrixXcd& rhs,
                                      int p);

struct ScatteringMatrix {
  int p = 0;
  double R = 0.0;
  cplx k2{1.0};
  cplx kp{1.0};
  std::uint64_t fingerprint = 0;
  std::vector<cplx> entries;  // row-major (2p+1)^2, [l + p][n + p]

  int dim() const { return 2 * p + 1; }
  cplx& at(int l, int n) { return entries[std::size_t(l + p) * dim() + (n + p)]; }
  cplx at(int l, int n) const { return entries[std::size_t(l + p) * dim() + (n + p)]; }
  CVector apply(const CVector& alpha) const;
};

ScatteringMatrix scattering_matrix_from_densities(const BoundaryDiscretization& boundary,
                                                  const PrecomputedDensities& dens, cplx k2,
                                                  cplx kp, double R);
ScatteringMatrix scattering_matrix_nystrom(const BoundaryDiscretization& boundary, cplx k2, cplx kp,
                                           int p, double R,
                                           PrecomputedDensities* densities_out = nullptr);
ScatteringMatrix scattering_matrix_disk(double radius, cplx k2, cplx kp, int p);
ScatteringMatrix scattering_matrix_pec_disk(double radius, cplx k2, int p);
ScatteringMatrix rotate_scattering_matrix(const ScatteringMatrix& S, double theta);

// |s_p| / max |s_n| over the matrix's last-order rows and columns.
double truncation_ratio(const ScatteringMatrix& S);

// S_k sigma + D_k mu at a point off the boundary (trapezoidal rule).
cplx layer_potential(const BoundaryDiscretization& boundary, const cplx* sigma, const cplx* mu,
                     cplx k, Vec2 x);
// The same potential evaluated at boundary node i (principal value, no jump term).
cplx layer_potential_on_boundary(const BoundaryDiscretization& boundary, const cplx* sigma,
                                 const cplx* mu, cplx k, int i);

// Scattering-matrix cache file.
void write_scattering_matrix(const std::filesystem::path& path, const ScatteringMatrix& S);
ScatteringMatrix read_scattering_matrix(const std::filesystem::path& path);

// Prototype inclusion: boundary, densities per incident mode and scattering matrix.
struct ParticleModel {
  ShapeParams shape;
  cplx k2{1.0};
  int p = 10;
  double R = 0.0;
  BoundaryDiscretization boundary;
  PrecomputedDensities densities;
  ScatteringMatrix S;
};

struct ModelBuildInfo {
  bool cache_hit = false;
  bool cache_rebuilt = false;
  std::filesystem::path cache_file;
};

std::filesystem::path scattering_cache_file(const std::filesystem::path& dir, cplx k2, cplx kp,
                                            int p);

// Builds the model; when cache_dir is set the scattering matrix is read from or
// written to it. On a cache hit the densities are only computed if requested.
ParticleModel build_particle_model(const ShapeParams& shape, cplx k2, int p,
                                   const std::optional<std::filesystem::path>& cache_dir = {},
                                   ModelBuildInfo* info = nullptr, bool need_densities = true);

// Factors the Muller system and fills model.densities if absent.
void ensure_densities(ParticleModel& model);

}  // namespace layerscatter
