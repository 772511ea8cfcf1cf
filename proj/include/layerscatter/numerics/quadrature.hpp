#pragma once

#include <span>
#include <vector>

#include "layerscatter/types.hpp"

namespace layerscatter::numerics {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  double a = -1.0;
  double b = 1.0;
};

QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

// Hybrid Gauss-trapezoidal rule on the periodic interval [0, 2pi) for
// integrands with a logarithmic singularity at a grid point s:
//   int F ~ h sum_{|k| >= a} F(s + kh) + h sum_p w_p [F(s + x_p h) + F(s - x_p h)].
// Regular samples with offsets 0 < |k| < a are dropped, as is k = 0.
struct AlpertRule {
  int order = 16;
  int n = 0;
  double h = 0.0;
  int excluded = 0;  // the "a" of the rule: offsets |k| < a are skipped
  std::span<const double> offsets;
  std::span<const double> weights;

  // Integrate F over [0, 2pi) with singularity at t = s_index * h.
  template <typename F>
  auto integrate(F&& f, int s_index = 0) const {
    const double s = s_index * h;
    auto sum = f(s + excluded * h) * 0.0;
    for (int k = excluded; k <= n - excluded; ++k) sum += f(s + k * h);
    auto corr = sum * 0.0;
    for (std::size_t p = 0; p < offsets.size(); ++p)
      corr += weights[p] * (f(s + offsets[p] * h) + f(s - offsets[p] * h));
    return h * (sum + corr);
  }
};

AlpertRule alpert_weights(int n, int order = 16);

}  // namespace layerscatter::numerics
