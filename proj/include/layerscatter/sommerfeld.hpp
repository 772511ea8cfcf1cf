#pragma once

#include <array>
#include <vector>

#include "layerscatter/types.hpp"

namespace layerscatter {

// Layer 1: y > 0, layer 2: -d < y < 0, layer 3: y < -d. Time dependence e^{-i w t}.
struct LayerStack {
  cplx k1{1.0}, k2{1.0}, k3{1.0};
  double d = 1.0;
  Vec2 source{0.0, 1.0};

  void validate() const;
  double max_abs_k() const;
};

// Minimum height of the source above y = 0, in wavelengths of k1.
inline constexpr double kMinSourceStandoff = 0.15;

enum class Segment : std::uint8_t { Gamma1, Gamma2, Gamma3 };

struct ContourParams {
  double b = 0.2;
  double pad = 20.0;
  int n_tail = 240;
  int n_mid = 20;
  int tail_panels = 8;
};

struct SommerfeldContour {
  double b = 0.2;
  double t_max = 0.0;
  CVector nodes;
  CVector weights;
  std::vector<Segment> segment;
  std::size_t size() const { return nodes.size(); }
};

// sqrt(lambda^2 - k^2) with vertical cuts upward from k and downward from -k.
cplx gamma(cplx lambda, cplx k);

SommerfeldContour build_contour(const LayerStack& layers, const ContourParams& params = {});

// Contour parameters resolving e^{-gamma |dy|} e^{i lambda dx} to `tol` for
// vertical separations >= min_dy and horizontal offsets <= max_dx.
ContourParams contour_for_accuracy(const LayerStack& layers, double min_dy, double max_dx,
                                   double tol = 1e-12);

using Vec4 = std::array<cplx, 4>;
using Mat4 = std::array<std::array<cplx, 4>, 4>;

// Unknowns (sigma1, sigma2+, sigma2-, sigma3); rows: value at y=0, value at
// y=-d, derivative at y=0, derivative at y=-d.
Mat4 interface_matrix(cplx lambda, const LayerStack& layers);
Vec4 incident_rhs(cplx lambda, const LayerStack& layers);

struct SpectralDensities {
  std::vector<Vec4> values;
  std::size_t size() const { return values.size(); }
};

// Per-node factored interface blocks plus cached branch values.
class InterfaceSolver {
 public:
  InterfaceSolver(const SommerfeldContour& contour, const LayerStack& layers);

  SpectralDensities solve(const std::vector<Vec4>* extra = nullptr) const;
  // Without the incident source: rhs only.
  SpectralDensities solve_rhs(const std::vector<Vec4>& rhs) const;
  Vec4 solve_node(std::size_t j, const Vec4& rhs) const;

  const SommerfeldContour& contour() const { return contour_; }
  const LayerStack& layers() const { return layers_; }
  std::size_t size() const { return contour_.size(); }
  cplx gamma1(std::size_t j) const { return g1_[j]; }
  cplx gamma2(std::size_t j) const { return g2_[j]; }
  cplx gamma3(std::size_t j) const { return g3_[j]; }
  cplx decay2(std::size_t j) const { return e2_[j]; }

 private:
  struct Factor {
    Mat4 lu;
    std::array<int, 4> piv;
  };
  SommerfeldContour contour_;
  LayerStack layers_;
  CVector g1_, g2_, g3_, e2_;
  std::vector<Factor> factors_;
};

SpectralDensities solve_interfaces(const SommerfeldContour& contour, const LayerStack& layers,
                                   const std::vector<Vec4>* extra = nullptr);

enum class FieldPart { U1s, U2t, U2b, U3s };

struct FieldSample {
  cplx value{0.0};
  cplx dx{0.0};
  cplx dy{0.0};
};

FieldSample eval_sommerfeld_field(const SpectralDensities& densities,
                                  const SommerfeldContour& contour, const LayerStack& layers,
                                  Vec2 point, FieldPart which, bool want_gradient = false);

// u2t + u2b at a middle-layer point.
FieldSample eval_middle_layer(const SpectralDensities& densities, const InterfaceSolver& solver,
                              Vec2 point, bool want_gradient = false);

// The free-space Green's function (i/4) H0(k |x - y|) by contour quadrature.
cplx sommerfeld_free_space(const SommerfeldContour& contour, cplx k, Vec2 target, Vec2 source);

cplx free_space_green(cplx k, Vec2 x, Vec2 y);

}  // namespace layerscatter
