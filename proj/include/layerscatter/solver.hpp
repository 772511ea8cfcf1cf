#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "layerscatter/coupling.hpp"
#include "layerscatter/gmres.hpp"
#include "layerscatter/multiscat.hpp"
#include "layerscatter/particle.hpp"
#include "layerscatter/sommerfeld.hpp"

namespace layerscatter {

struct Solution {
  SpectralDensities densities;
  CVector beta;      // outgoing coefficients, block m holds n = -p..p
  CVector incoming;  // total incoming local coefficients about each center
  std::vector<double> history;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
  std::uint64_t fingerprint = 0;
};

enum class Region { Layer1, Layer2, EnclosingDisk, Inclusion, Layer3 };

struct PointLocation {
  Region region = Region::Layer2;
  int instance = -1;
};

// Layered medium with inclusions: the interface blocks, the coupling blocks and
// the free-space multiple-scattering blocks of one scene. Unknowns are the
// outgoing coefficients beta; the Schur system is
//   (I - S T - S C A^{-1} B) beta = S C A^{-1} b.
class LayeredProblem {
 public:
  LayeredProblem(const LayerStack& layers, const SommerfeldContour& contour,
                 std::vector<ParticleInstance> instances,
                 std::shared_ptr<const ParticleModel> model,
                 CouplingPath path = CouplingPath::Auto, CouplingOptions coupling = {});

  std::size_t size() const { return multiscat_.size(); }
  int order() const { return p_; }
  std::size_t num_instances() const { return instances_.size(); }
  const LayerStack& layers() const { return interfaces_.layers(); }
  const InterfaceSolver& interfaces() const { return interfaces_; }
  const CouplingContext& coupling() const { return *coupling_; }
  const MultiscatOperator& multiscat() const { return multiscat_; }
  const ParticleModel& model() const { return *model_; }
  const std::vector<ParticleInstance>& instances() const { return instances_; }
  CouplingPath path() const { return path_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  void apply_schur(const CVector& beta, CVector& out) const;
  CVector schur_rhs() const;
  // Interface densities for given beta: one interface solve with b + B beta.
  SpectralDensities recover_densities(const CVector& beta) const;
  // C sigma + T beta.
  CVector incoming(const SpectralDensities& densities, const CVector& beta) const;

  PointLocation locate(Vec2 point) const;

 private:
  InterfaceSolver interfaces_;
  std::vector<ParticleInstance> instances_;
  std::shared_ptr<const ParticleModel> model_;
  int p_;
  CouplingPath path_;
  MultiscatOperator multiscat_;
  std::unique_ptr<CouplingContext> coupling_;
  std::uint64_t fingerprint_ = 0;
  double bin_ = 1.0;
  std::unordered_map<std::int64_t, std::vector<int>> bins_;
};

Solution solve_layered_scene(const LayeredProblem& problem, const GmresConfig& config);

// ||rhs - A beta|| / ||rhs|| recomputed from scratch.
double schur_residual(const LayeredProblem& problem, const CVector& beta);

// Total field. Points on y = 0 are evaluated from layer 1, points on y = -d
// from layer 2; points on an inclusion boundary from the exterior side.
cplx eval_total_field(const LayeredProblem& problem, const Solution& solution, Vec2 point);

// Field of the representation valid in `layer` (1, 2 or 3), with gradient.
// In layer 2 the gradient is available only outside the enclosing disks.
FieldSample eval_layer_field(const LayeredProblem& problem, const Solution& solution, Vec2 point,
                             int layer, bool want_gradient = false);

// Exterior and interior limits of the total field at the boundary nodes of one instance.
struct BoundaryTraces {
  std::vector<Vec2> nodes;
  CVector exterior;
  CVector interior;
};
BoundaryTraces boundary_traces(const LayeredProblem& problem, const Solution& solution,
                               std::size_t instance);

}  // namespace layerscatter
