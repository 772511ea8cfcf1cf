#pragma once

#include <functional>
#include <span>
#include <vector>

#include "layerscatter/types.hpp"

namespace layerscatter::numerics {

struct Box {
  double x0, x1, y0, y1;
  bool contains(Vec2 p, double slack = 1e-12) const {
    const double sx = slack * (1.0 + std::abs(x1 - x0));
    const double sy = slack * (1.0 + std::abs(y1 - y0));
    return p.x >= x0 - sx && p.x <= x1 + sx && p.y >= y0 - sy && p.y <= y1 + sy;
  }
};

// Chebyshev points of the second kind on [a, b], ascending.
std::vector<double> chebyshev_points(int m, double a, double b);

// Barycentric weights for the m ascending second-kind points at x.
// Fills w (length m) so that p(x) = sum_i w_i f_i.
void barycentric_row(int m, double a, double b, double x, std::span<double> w);

struct ChebyshevPatch {
  Box box{};
  int m1 = 0;
  int m2 = 0;
  std::vector<cplx> values;  // m2 rows (y) of m1 samples (x)

  cplx sample(int ix, int iy) const { return values[std::size_t(iy) * m1 + ix]; }
};

ChebyshevPatch cheb_build(const Box& box, int m1, int m2,
                          const std::function<cplx(double, double)>& f);
cplx cheb_eval(const ChebyshevPatch& patch, Vec2 point);

}  // namespace layerscatter::numerics
