#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "layerscatter/multiscat.hpp"
#include "layerscatter/sommerfeld.hpp"
#include "layerscatter/types.hpp"

namespace layerscatter {

namespace numerics {
class NufftPlan;
}

// Spectral densities induced at the middle-layer interfaces by outgoing
// expansions inside layer 2:
//   sum_m sum_n beta_n H_n e^{in theta}
//     = (1/4pi) sum_j w_j / gamma2_j * plus_j  * e^{-gamma2 y} e^{i lambda_j (x - x0)}          (above)
//     = (1/4pi) sum_j w_j / gamma2_j * minus_j * e^{gamma2 (y + d)} e^{i lambda_j (x - x0)}     (below)
struct SpectralUpdate {
  CVector plus;
  CVector minus;

  std::size_t size() const { return plus.size(); }
  // Additive right-hand side for InterfaceSolver::solve.
  std::vector<Vec4> rhs(const InterfaceSolver& solver) const;
};

// u2t + u2b and its gradient sampled on rows y = Chebyshev nodes of boxes of
// height box_height, and columns x = x_origin + l * x_step, l = l_min .. l_min + nx - 1.
struct InterpGrid {
  double x_origin = 0.0;
  double x_step = 0.0;
  int l_min = 0;
  int nx = 0;
  double y_low = 0.0;
  double box_height = 0.0;
  int boxes_y = 0;
  int order = 16;
  std::vector<std::uint8_t> active;  // per y-box
  CVector value, dx, dy;             // (boxes_y * order) rows of nx samples

  std::size_t rows() const { return std::size_t(boxes_y) * order; }
  double row_y(int row) const;
  double column_x(int col) const { return x_origin + (l_min + col) * x_step; }
  // Tensor interpolation: 16-point equispaced Lagrange in x, Chebyshev in y.
  FieldSample sample(Vec2 point) const;
};

enum class CouplingPath { Auto, Direct, Nufft };

struct CouplingOptions {
  double nufft_tol = 1e-12;
  double interp_tol = 1e-11;
  double snap_tol = 1e-11;
  // Zero selects the step automatically.
  double x_step = 0.0;
  double box_height = 0.0;
  double snap_step = 0.0;
  // Auto selects NUFFT when M * N_S exceeds this.
  double crossover = 5e6;
};

// Off-diagonal blocks of the coupled system for one contour, layer stack and
// set of instances. Holds a reference to `solver`, which must outlive it.
class CouplingContext {
 public:
  CouplingContext(const InterfaceSolver& solver, std::vector<ParticleInstance> instances, int p,
                  CouplingOptions options = {});
  ~CouplingContext();
  CouplingContext(CouplingContext&&) noexcept;
  CouplingContext& operator=(CouplingContext&&) = delete;

  int order() const { return p_; }
  std::size_t num_instances() const { return instances_.size(); }
  const std::vector<ParticleInstance>& instances() const { return instances_; }
  const InterfaceSolver& solver() const { return *solver_; }
  const CouplingOptions& options() const { return options_; }
  bool use_nufft(CouplingPath path) const;

  // Stacked local coefficients of u2t + u2b: block m holds n = -p..p about center m.
  CVector sommerfeld_to_local_direct(const SpectralDensities& densities) const;
  InterpGrid build_interp_grid(const SpectralDensities& densities) const;
  CVector sommerfeld_to_local_nufft(const InterpGrid& grid) const;
  CVector sommerfeld_to_local_nufft(const SpectralDensities& densities) const;
  CVector sommerfeld_to_local(const SpectralDensities& densities, CouplingPath path) const;

  SpectralUpdate multipole_to_sommerfeld_direct(const CVector& beta) const;
  SpectralUpdate multipole_to_sommerfeld_nufft(const CVector& beta) const;
  SpectralUpdate multipole_to_sommerfeld(const CVector& beta, CouplingPath path) const;

  double x_step() const { return x_step_; }
  double box_height() const { return box_height_; }
  double snap_step() const { return snap_step_; }
  int snap_order() const { return snap_p_; }
  int circle_samples() const { return nsamp_; }

 private:
  struct Sample {
    int col = 0;
    int box = 0;
    double wx[16];
    double wy[16];
  };

  void setup_tables();
  void setup_interp();
  void setup_snap();

  const InterfaceSolver* solver_;
  std::vector<ParticleInstance> instances_;
  int p_;
  CouplingOptions options_;
  cplx k2_;
  double x0_ = 0.0;
  double d_ = 0.0;

  // Per contour node.
  std::vector<int> tail3_, tail1_, mid_;
  CVector wscale_;           // w_j / (4 pi)
  CVector local_plus_;       // (i (lambda - gamma) / k)^n, node-major, n = -p..p
  CVector local_minus_;      // (i (lambda + gamma) / k)^n
  CVector out_plus_;         // (-i (lambda - gamma) / k)^n, node-major, n = -p..p
  CVector out_minus_;        // (-i (lambda + gamma) / k)^n

  // Sommerfeld-to-local interpolation.
  double x_step_ = 0.0;
  double box_height_ = 0.0;
  double y_low_ = 0.0;
  int boxes_y_ = 0;
  int l_min_ = 0;
  int nx_ = 0;
  std::vector<std::uint8_t> active_;
  int nsamp_ = 0;
  std::vector<Sample> samples_;  // nsamp_ per instance
  std::vector<double> env3_, env1_;
  std::vector<double> mid_table_;  // mid nodes x nx
  std::unique_ptr<numerics::NufftPlan> plan3_, plan1_;
  CVector dft_;                    // e^{-i n phi_i} / nsamp_
  CVector proj_j_, proj_dj_;       // per instance, n = -p..p

  // Multipole-to-Sommerfeld snapping.
  double snap_step_ = 0.0;
  int snap_p_ = 0;
  int a_min_ = 0;
  int na_ = 0;
  std::vector<int> snap_a_, snap_row_;
  std::vector<int> row_ids_;
  std::vector<std::vector<int>> row_members_;
  CVector shift_tables_;           // per instance, q = -(p + p')..(p + p')
  CVector snap_plus3_, snap_minus3_, snap_plus1_, snap_minus1_;  // [n][node], n = -p'..p'
  std::vector<double> snap_env3_, snap_env1_;
  std::unique_ptr<numerics::NufftPlan> snap_plan3_, snap_plan1_;
};

}  // namespace layerscatter
