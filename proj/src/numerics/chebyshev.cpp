#include "layerscatter/numerics/chebyshev.hpp"

#include <cmath>

#include "layerscatter/error.hpp"
#include "layerscatter/simd/kernels.hpp"

namespace layerscatter::numerics {

std::vector<double> chebyshev_points(int m, double a, double b) {
  std::vector<double> x(m);
  if (m == 1) {
    x[0] = 0.5 * (a + b);
    return x;
  }
  for (int i = 0; i < m; ++i) {
    const double c = -std::cos(kPi * i / (m - 1));
    x[i] = 0.5 * (a + b) + 0.5 * (b - a) * c;
  }
  x[0] = a;
  x[m - 1] = b;
  return x;
}

void barycentric_row(int m, double a, double b, double x, std::span<double> w) {
  if (m == 1) {
    w[0] = 1.0;
    return;
  }
  const double t = (2.0 * x - a - b) / (b - a);
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const double node = -std::cos(kPi * i / (m - 1));
    const double diff = t - node;
    if (std::abs(diff) < 1e-15) {
      for (int k = 0; k < m; ++k) w[k] = 0.0;
      w[i] = 1.0;
      return;
    }
    double bw = (i & 1) ? -1.0 : 1.0;
    if (i == 0 || i == m - 1) bw *= 0.5;
    w[i] = bw / diff;
    total += w[i];
  }
  for (int i = 0; i < m; ++i) w[i] /= total;
}

ChebyshevPatch cheb_build(const Box& box, int m1, int m2,
                          const std::function<cplx(double, double)>& f) {
  if (m1 < 1 || m2 < 1) throw ConfigError("cheb_build: m1, m2 must be >= 1");
  ChebyshevPatch patch;
  patch.box = box;
  patch.m1 = m1;
  patch.m2 = m2;
  const auto xs = chebyshev_points(m1, box.x0, box.x1);
  const auto ys = chebyshev_points(m2, box.y0, box.y1);
  patch.values.resize(std::size_t(m1) * m2);
  for (int iy = 0; iy < m2; ++iy)
    for (int ix = 0; ix < m1; ++ix) patch.values[std::size_t(iy) * m1 + ix] = f(xs[ix], ys[iy]);
  return patch;
}

cplx cheb_eval(const ChebyshevPatch& patch, Vec2 point) {
  if (!patch.box.contains(point)) throw DomainError("cheb_eval: point outside patch box");
  std::vector<double> wx(patch.m1), wy(patch.m2);
  barycentric_row(patch.m1, patch.box.x0, patch.box.x1, point.x, wx);
  barycentric_row(patch.m2, patch.box.y0, patch.box.y1, point.y, wy);
  const auto& k = simd::kernels();
  cplx sum = 0.0;
  for (int iy = 0; iy < patch.m2; ++iy)
    sum += wy[iy] * k.dot_real(wx.data(), &patch.values[std::size_t(iy) * patch.m1], patch.m1);
  return sum;
}

}  // namespace layerscatter::numerics
