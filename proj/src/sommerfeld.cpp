#include "layerscatter/sommerfeld.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "layerscatter/error.hpp"
#include "layerscatter/numerics/bessel.hpp"
#include "layerscatter/numerics/quadrature.hpp"

namespace layerscatter {
namespace {

void check_k(cplx k, const char* name) {
  if (!(k.real() > 0.0) || k.imag() < 0.0 || !std::isfinite(k.real()) || !std::isfinite(k.imag()))
    throw ConfigError(std::string(name) + " must satisfy Re k > 0 and Im k >= 0");
}

double point_segment_distance(cplx p, cplx a, cplx b) {
  const cplx ab = b - a;
  const double t = std::clamp(((p - a) * std::conj(ab)).real() / std::norm(ab), 0.0, 1.0);
  return std::abs(p - (a + t * ab));
}

// Panel breakpoints on [0, t_max]: the real parts of the wavenumbers are
// breakpoints and the panel that is longest relative to its distance from
// the nearest branch point is bisected until `count` panels exist.
std::vector<double> tail_breakpoints(const LayerStack& layers, double b, double t_max, int count) {
  std::vector<double> kr;
  for (cplx k : {layers.k1, layers.k2, layers.k3})
    if (k.real() > 0.0 && k.real() < t_max) kr.push_back(k.real());
  std::vector<double> pts{0.0, t_max};
  for (double k : kr)
    if (std::none_of(pts.begin(), pts.end(), [&](double p) { return std::abs(p - k) < 1e-12; }))
      pts.push_back(k);
  std::sort(pts.begin(), pts.end());
  auto score = [&](double lo, double hi) {
    double dist = 1e300;
    for (double k : kr) dist = std::min(dist, k < lo ? lo - k : (k > hi ? k - hi : 0.0));
    if (kr.empty()) dist = 0.0;
    return (hi - lo) / (b + dist);
  };
  while (int(pts.size()) - 1 < count) {
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double s = score(pts[i], pts[i + 1]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    pts.insert(pts.begin() + best + 1, 0.5 * (pts[best] + pts[best + 1]));
  }
  return pts;
}

void factor4(Mat4& a, std::array<int, 4>& piv, cplx lambda) {
  double scale = 0.0;
  for (auto& row : a)
    for (auto v : row) scale = std::max(scale, std::abs(v));
  for (int c = 0; c < 4; ++c) {
    int p = c;
    for (int r = c + 1; r < 4; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    piv[c] = p;
    if (p != c) std::swap(a[p], a[c]);
    if (!(std::abs(a[c][c]) > 1e-14 * scale)) {
      std::ostringstream os;
      os << "singular interface block at lambda = " << lambda.real() << (lambda.imag() < 0 ? "" : "+")
         << lambda.imag() << "i";
      throw SolverError(os.str());
    }
    for (int r = c + 1; r < 4; ++r) {
      a[r][c] /= a[c][c];
      for (int k = c + 1; k < 4; ++k) a[r][k] -= a[r][c] * a[c][k];
    }
  }
}

Vec4 solve4(const Mat4& lu, const std::array<int, 4>& piv, Vec4 b) {
  for (int c = 0; c < 4; ++c)
    if (piv[c] != c) std::swap(b[c], b[piv[c]]);
  for (int c = 0; c < 4; ++c)
    for (int r = c + 1; r < 4; ++r) b[r] -= lu[r][c] * b[c];
  for (int c = 3; c >= 0; --c) {
    for (int k = c + 1; k < 4; ++k) b[c] -= lu[c][k] * b[k];
    b[c] /= lu[c][c];
  }
  return b;
}

void check_layer(const LayerStack& layers, Vec2 p, FieldPart which) {
  const double tol = 1e-12 * (1.0 + layers.d);
  bool ok = false;
  switch (which) {
    case FieldPart::U1s: ok = p.y >= -tol; break;
    case FieldPart::U2t:
    case FieldPart::U2b: ok = p.y <= tol && p.y >= -layers.d - tol; break;
    case FieldPart::U3s: ok = p.y <= -layers.d + tol; break;
  }
  if (!ok) throw DomainError("eval_sommerfeld_field: point not in the layer of the requested field");
}

}  // namespace

void LayerStack::validate() const {
  check_k(k1, "k1");
  check_k(k2, "k2");
  check_k(k3, "k3");
  if (!(d > 0.0)) throw ConfigError("d must be > 0");
  if (!(source.y > 0.0)) throw ConfigError("source must lie in layer 1 (y0 > 0)");
  const double standoff = kMinSourceStandoff * kTwoPi / k1.real();
  if (source.y < standoff) {
    std::ostringstream os;
    os << "source height y0 = " << source.y << " is below the minimum standoff " << standoff << " ("
       << kMinSourceStandoff << " wavelengths of k1)";
    throw ConfigError(os.str());
  }
}

double LayerStack::max_abs_k() const {
  return std::max({std::abs(k1), std::abs(k2), std::abs(k3)});
}

cplx gamma(cplx lambda, cplx k) {
  const cplx a = lambda - k;
  const cplx b = lambda + k;
  if (a == cplx(0.0) || b == cplx(0.0)) throw DomainError("gamma: lambda at a branch point");
  if ((a.real() == 0.0 && a.imag() > 0.0) || (b.real() == 0.0 && b.imag() < 0.0))
    throw DomainError("gamma: lambda on a branch cut");
  double ta = std::arg(a);
  if (ta > 0.5 * kPi) ta -= kTwoPi;
  double tb = std::arg(b);
  if (tb <= -0.5 * kPi) tb += kTwoPi;
  return std::sqrt(std::abs(a) * std::abs(b)) * std::exp(kI * (0.5 * (ta + tb)));
}

SommerfeldContour build_contour(const LayerStack& layers, const ContourParams& params) {
  if (!(params.b > 0.0)) throw ConfigError("contour b must be > 0");
  if (!(params.pad > 0.0)) throw ConfigError("contour pad must be > 0");
  if (params.n_tail < 1 || params.n_mid < 1 || params.tail_panels < 1)
    throw ConfigError("contour node counts must be >= 1");
  SommerfeldContour c;
  c.b = params.b;
  c.t_max = layers.max_abs_k() + params.pad;
  const double b = params.b;

  const cplx corner_lo(0.0, -b), corner_hi(0.0, b);
  for (cplx k : {layers.k1, layers.k2, layers.k3}) {
    for (cplx p : {k, -k}) {
      const double dist = std::min({point_segment_distance(p, corner_lo, cplx(c.t_max, -b)),
                                    point_segment_distance(p, corner_lo, corner_hi),
                                    point_segment_distance(p, cplx(-c.t_max, b), corner_hi)});
      if (dist < 0.05) throw ConfigError("contour passes within 0.05 of a branch point");
    }
  }

  const auto bp = tail_breakpoints(layers, b, c.t_max, params.tail_panels);
  const int panels = int(bp.size()) - 1;
  std::vector<int> per_panel(panels, params.n_tail / panels);
  for (int i = 0; i < params.n_tail % panels; ++i) per_panel[i] += 1;

  std::vector<double> tail_t, tail_w;
  for (int i = 0; i < panels; ++i) {
    if (per_panel[i] == 0) continue;
    auto gl = numerics::gauss_legendre(per_panel[i], bp[i], bp[i + 1]);
    tail_t.insert(tail_t.end(), gl.nodes.begin(), gl.nodes.end());
    tail_w.insert(tail_w.end(), gl.weights.begin(), gl.weights.end());
  }
  const std::size_t nt = tail_t.size();
  c.nodes.reserve(2 * nt + params.n_mid);
  // Gamma3: t + ib, t from -t_max up to 0.
  for (std::size_t i = nt; i-- > 0;) {
    c.nodes.emplace_back(-tail_t[i], b);
    c.weights.emplace_back(tail_w[i], 0.0);
    c.segment.push_back(Segment::Gamma3);
  }
  // Gamma2: from ib down to -ib.
  auto mid = numerics::gauss_legendre(params.n_mid, -b, b);
  for (int i = 0; i < params.n_mid; ++i) {
    c.nodes.emplace_back(0.0, -mid.nodes[i]);
    c.weights.emplace_back(0.0, -mid.weights[i]);
    c.segment.push_back(Segment::Gamma2);
  }
  // Gamma1: t - ib, t from 0 to t_max.
  for (std::size_t i = 0; i < nt; ++i) {
    c.nodes.emplace_back(tail_t[i], -b);
    c.weights.emplace_back(tail_w[i], 0.0);
    c.segment.push_back(Segment::Gamma1);
  }
  return c;
}

ContourParams contour_for_accuracy(const LayerStack& layers, double min_dy, double max_dx,
                                   double tol) {
  if (!(min_dy > 0.0)) throw ConfigError("contour_for_accuracy: min_dy must be > 0");
  ContourParams p;
  p.pad = std::max(p.pad, -std::log(tol) / min_dy);
  const double t_max = layers.max_abs_k() + p.pad;
  const double rate = std::hypot(std::max(max_dx, 0.0), min_dy);
  const int panels = std::max(p.tail_panels, int(std::ceil(t_max * rate / 40.0)) + 4);
  p.tail_panels = panels;
  p.n_tail = 30 * panels;
  return p;
}

Mat4 interface_matrix(cplx lambda, const LayerStack& layers) {
  const cplx g1 = gamma(lambda, layers.k1);
  const cplx g2 = gamma(lambda, layers.k2);
  const cplx g3 = gamma(lambda, layers.k3);
  const cplx e = std::exp(-g2 * layers.d);
  Mat4 a{};
  a[0] = {1.0 / g1, -1.0 / g2, -e / g2, 0.0};
  a[1] = {0.0, e / g2, 1.0 / g2, -1.0 / g3};
  a[2] = {1.0, 1.0, -e, 0.0};
  a[3] = {0.0, e, -1.0, -1.0};
  return a;
}

Vec4 incident_rhs(cplx lambda, const LayerStack& layers) {
  if (!(layers.source.y > 0.0)) throw ConfigError("incident_rhs: source must have y0 > 0");
  const cplx g1 = gamma(lambda, layers.k1);
  const cplx e = std::exp(-g1 * layers.source.y);
  return {-e / g1, 0.0, e, 0.0};
}

InterfaceSolver::InterfaceSolver(const SommerfeldContour& contour, const LayerStack& layers)
    : contour_(contour), layers_(layers) {
  const std::size_t n = contour.size();
  g1_.resize(n);
  g2_.resize(n);
  g3_.resize(n);
  e2_.resize(n);
  factors_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const cplx lam = contour.nodes[j];
    g1_[j] = gamma(lam, layers.k1);
    g2_[j] = gamma(lam, layers.k2);
    g3_[j] = gamma(lam, layers.k3);
    e2_[j] = std::exp(-g2_[j] * layers.d);
    factors_[j].lu = interface_matrix(lam, layers);
    factor4(factors_[j].lu, factors_[j].piv, lam);
  }
}

Vec4 InterfaceSolver::solve_node(std::size_t j, const Vec4& rhs) const {
  return solve4(factors_[j].lu, factors_[j].piv, rhs);
}

SpectralDensities InterfaceSolver::solve(const std::vector<Vec4>* extra) const {
  const std::size_t n = size();
  if (extra != nullptr && extra->size() != n)
    throw ConfigError("solve_interfaces: extra right-hand side has wrong length");
  SpectralDensities out;
  out.values.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const cplx e = std::exp(-g1_[j] * layers_.source.y);
    Vec4 rhs{-e / g1_[j], 0.0, e, 0.0};
    if (extra != nullptr)
      for (int i = 0; i < 4; ++i) rhs[i] += (*extra)[j][i];
    out.values[j] = solve_node(j, rhs);
  }
  return out;
}

SpectralDensities InterfaceSolver::solve_rhs(const std::vector<Vec4>& rhs) const {
  if (rhs.size() != size()) throw ConfigError("solve_rhs: right-hand side has wrong length");
  SpectralDensities out;
  out.values.resize(rhs.size());
  for (std::size_t j = 0; j < rhs.size(); ++j) out.values[j] = solve_node(j, rhs[j]);
  return out;
}

SpectralDensities solve_interfaces(const SommerfeldContour& contour, const LayerStack& layers,
                                   const std::vector<Vec4>* extra) {
  return InterfaceSolver(contour, layers).solve(extra);
}

FieldSample eval_sommerfeld_field(const SpectralDensities& densities,
                                  const SommerfeldContour& contour, const LayerStack& layers,
                                  Vec2 point, FieldPart which, bool want_gradient) {
  check_layer(layers, point, which);
  if (densities.size() != contour.size())
    throw ConfigError("eval_sommerfeld_field: densities do not match contour");
  const double dx = point.x - layers.source.x;
  FieldSample out;
  for (std::size_t j = 0; j < contour.size(); ++j) {
    const cplx lam = contour.nodes[j];
    cplx g, expo, sig, slope;
    switch (which) {
      case FieldPart::U1s:
        g = gamma(lam, layers.k1);
        expo = -g * point.y;
        sig = densities.values[j][0];
        slope = -g;
        break;
      case FieldPart::U2t:
        g = gamma(lam, layers.k2);
        expo = g * point.y;
        sig = densities.values[j][1];
        slope = g;
        break;
      case FieldPart::U2b:
        g = gamma(lam, layers.k2);
        expo = -g * (point.y + layers.d);
        sig = densities.values[j][2];
        slope = -g;
        break;
      case FieldPart::U3s:
        g = gamma(lam, layers.k3);
        expo = g * (point.y + layers.d);
        sig = densities.values[j][3];
        slope = g;
        break;
    }
    const cplx term = contour.weights[j] * sig / g * std::exp(expo + kI * lam * dx);
    out.value += term;
    if (want_gradient) {
      out.dx += kI * lam * term;
      out.dy += slope * term;
    }
  }
  const double s = 1.0 / (4.0 * kPi);
  out.value *= s;
  out.dx *= s;
  out.dy *= s;
  return out;
}

FieldSample eval_middle_layer(const SpectralDensities& densities, const InterfaceSolver& solver,
                              Vec2 point, bool want_gradient) {
  const LayerStack& layers = solver.layers();
  check_layer(layers, point, FieldPart::U2t);
  const auto& contour = solver.contour();
  const double dx = point.x - layers.source.x;
  FieldSample out;
  for (std::size_t j = 0; j < contour.size(); ++j) {
    const cplx lam = contour.nodes[j];
    const cplx g = solver.gamma2(j);
    const cplx wave = contour.weights[j] / g * std::exp(kI * lam * dx);
    const cplx top = densities.values[j][1] * std::exp(g * point.y);
    const cplx bot = densities.values[j][2] * std::exp(-g * (point.y + layers.d));
    out.value += wave * (top + bot);
    if (want_gradient) {
      out.dx += kI * lam * wave * (top + bot);
      out.dy += g * wave * (top - bot);
    }
  }
  const double s = 1.0 / (4.0 * kPi);
  out.value *= s;
  out.dx *= s;
  out.dy *= s;
  return out;
}

cplx sommerfeld_free_space(const SommerfeldContour& contour, cplx k, Vec2 target, Vec2 source) {
  const double dx = target.x - source.x;
  const double dy = std::abs(target.y - source.y);
  cplx sum = 0.0;
  for (std::size_t j = 0; j < contour.size(); ++j) {
    const cplx lam = contour.nodes[j];
    const cplx g = gamma(lam, k);
    sum += contour.weights[j] / g * std::exp(-g * dy + kI * lam * dx);
  }
  return sum / (4.0 * kPi);
}

cplx free_space_green(cplx k, Vec2 x, Vec2 y) {
  return 0.25 * kI * numerics::hankel1(0, k * norm(x - y));
}

}  // namespace layerscatter
