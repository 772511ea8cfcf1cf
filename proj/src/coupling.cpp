#include "layerscatter/coupling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "layerscatter/error.hpp"
#include "layerscatter/numerics/bessel.hpp"
#include "layerscatter/numerics/chebyshev.hpp"
#include "layerscatter/numerics/nufft.hpp"
#include "layerscatter/simd/kernels.hpp"

namespace layerscatter {
namespace {

constexpr int kOrder = 16;
constexpr int kHalf = kOrder / 2;
// max |prod (t - i)| / 16! for a centred 16-point equispaced stencil.
constexpr double kLagrangeConst = 6.2696e7 / 2.0922789888e13;
// 2^15 * 16! for degree-15 Chebyshev interpolation on an interval of half-length a.
constexpr double kChebConst = 32768.0 * 2.0922789888e13;

void fill_powers(cplx z, int P, cplx* out) {
  out[P] = 1.0;
  for (int n = 1; n <= P; ++n) out[P + n] = out[P + n - 1] * z;
  const cplx zi = 1.0 / z;
  for (int n = 1; n <= P; ++n) out[P - n] = out[P - n + 1] * zi;
}

// Barycentric weights of the equispaced nodes 0..15 at t.
void lagrange_weights(double t, double* w) {
  static const auto binom = [] {
    std::array<double, kOrder> b{};
    b[0] = 1.0;
    for (int i = 1; i < kOrder; ++i) b[i] = b[i - 1] * (kOrder - i) / i;
    return b;
  }();
  for (int i = 0; i < kOrder; ++i) {
    if (t == double(i)) {
      std::fill(w, w + kOrder, 0.0);
      w[i] = 1.0;
      return;
    }
  }
  double sum = 0.0;
  for (int i = 0; i < kOrder; ++i) {
    const double li = ((i % 2) ? -binom[i] : binom[i]) / (t - i);
    w[i] = li;
    sum += li;
  }
  for (int i = 0; i < kOrder; ++i) w[i] /= sum;
}

double wrap_angle(double x) {
  double t = std::fmod(x, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t = 0.0;
  return t;
}

}  // namespace

std::vector<Vec4> SpectralUpdate::rhs(const InterfaceSolver& solver) const {
  if (plus.size() != solver.size() || minus.size() != solver.size())
    throw ConfigError("SpectralUpdate: size does not match the contour");
  std::vector<Vec4> out(plus.size());
  for (std::size_t j = 0; j < plus.size(); ++j) {
    const cplx g = solver.gamma2(j);
    out[j] = {plus[j] / g, -minus[j] / g, plus[j], -minus[j]};
  }
  return out;
}

double InterpGrid::row_y(int row) const {
  const int box = row / order;
  const int q = row % order;
  const double a = y_low + box * box_height;
  return numerics::chebyshev_points(order, a, a + box_height)[q];
}

FieldSample InterpGrid::sample(Vec2 point) const {
  const double u = (point.x - x_origin) / x_step - l_min;
  const int c0 = int(std::floor(u)) - (kHalf - 1);
  if (c0 < 0 || c0 + kOrder > nx) throw DomainError("InterpGrid: point outside x coverage");
  int box = int(std::floor((point.y - y_low) / box_height));
  box = std::clamp(box, 0, boxes_y - 1);
  const double a = y_low + box * box_height;
  if (point.y < a - 1e-9 * box_height || point.y > a + box_height * (1 + 1e-9))
    throw DomainError("InterpGrid: point outside y coverage");
  if (!active[box]) throw DomainError("InterpGrid: box was not sampled");
  double wx[kOrder], wy[kOrder];
  lagrange_weights(u - c0, wx);
  numerics::barycentric_row(order, a, a + box_height, point.y, std::span<double>(wy, kOrder));
  FieldSample s;
  for (int q = 0; q < order; ++q) {
    const std::size_t off = (std::size_t(box) * order + q) * nx + c0;
    cplx v = 0.0, gx = 0.0, gy = 0.0;
    for (int i = 0; i < kOrder; ++i) {
      v += wx[i] * value[off + i];
      gx += wx[i] * dx[off + i];
      gy += wx[i] * dy[off + i];
    }
    s.value += wy[q] * v;
    s.dx += wy[q] * gx;
    s.dy += wy[q] * gy;
  }
  return s;
}

CouplingContext::CouplingContext(const InterfaceSolver& solver,
                                 std::vector<ParticleInstance> instances, int p,
                                 CouplingOptions options)
    : solver_(&solver), instances_(std::move(instances)), p_(p), options_(options) {
  if (p_ < 0) throw ConfigError("coupling: p must be >= 0");
  if (!(options_.nufft_tol >= 1e-14 && options_.nufft_tol <= 1e-4))
    throw ConfigError("coupling: nufft_tol must lie in [1e-14, 1e-4]");
  if (!(options_.interp_tol > 0.0 && options_.snap_tol > 0.0 && options_.snap_tol < 1.0))
    throw ConfigError("coupling: tolerances must be positive");
  const LayerStack& layers = solver.layers();
  k2_ = layers.k2;
  x0_ = layers.source.x;
  d_ = layers.d;
  validate_instances(instances_);
  for (const auto& inst : instances_) {
    if (!(inst.center.y + inst.R < 0.0 && inst.center.y - inst.R > -d_))
      throw ConfigError("coupling: enclosing disk crosses a layer interface");
  }
  setup_tables();
  if (!instances_.empty()) {
    setup_interp();
    setup_snap();
  }
}

CouplingContext::~CouplingContext() = default;
CouplingContext::CouplingContext(CouplingContext&&) noexcept = default;

bool CouplingContext::use_nufft(CouplingPath path) const {
  if (path == CouplingPath::Direct) return false;
  if (path == CouplingPath::Nufft) return true;
  return double(instances_.size()) * double(solver_->size()) > options_.crossover;
}

void CouplingContext::setup_tables() {
  const auto& contour = solver_->contour();
  const std::size_t ns = contour.size();
  const int np = 2 * p_ + 1;
  wscale_.resize(ns);
  local_plus_.resize(ns * np);
  local_minus_.resize(ns * np);
  out_plus_.resize(ns * np);
  out_minus_.resize(ns * np);
  for (std::size_t j = 0; j < ns; ++j) {
    switch (contour.segment[j]) {
      case Segment::Gamma3: tail3_.push_back(int(j)); break;
      case Segment::Gamma1: tail1_.push_back(int(j)); break;
      case Segment::Gamma2: mid_.push_back(int(j)); break;
    }
    const cplx lam = contour.nodes[j];
    const cplx g = solver_->gamma2(j);
    wscale_[j] = contour.weights[j] / (4.0 * kPi);
    fill_powers(kI * (lam - g) / k2_, p_, &local_plus_[j * np]);
    fill_powers(kI * (lam + g) / k2_, p_, &local_minus_[j * np]);
    fill_powers(-kI * (lam - g) / k2_, p_, &out_plus_[j * np]);
    fill_powers(-kI * (lam + g) / k2_, p_, &out_minus_[j * np]);
  }
}

void CouplingContext::setup_interp() {
  const auto& contour = solver_->contour();
  double delta = 1e300, xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& inst : instances_) {
    delta = std::min({delta, -(inst.center.y + inst.R), inst.center.y - inst.R + d_});
    xmin = std::min(xmin, inst.center.x - inst.R);
    xmax = std::max(xmax, inst.center.x + inst.R);
    ymin = std::min(ymin, inst.center.y - inst.R);
    ymax = std::max(ymax, inst.center.y + inst.R);
  }
  const double wavelength = kTwoPi / std::abs(k2_);

  // Largest steps whose interpolation error for every contour mode, weighted by
  // its decay over the standoff delta, stays below interp_tol.
  double hx = wavelength / 4.0;
  double hy = wavelength;
  for (std::size_t j = 0; j < contour.size(); ++j) {
    const cplx g = solver_->gamma2(j);
    const double amp = std::exp(-g.real() * delta);
    const double lam = std::abs(contour.nodes[j]);
    const double gam = std::abs(g);
    if (lam > 0.0)
      hx = std::min(hx, std::pow(options_.interp_tol / (amp * kLagrangeConst), 1.0 / kOrder) / lam);
    if (gam > 0.0)
      hy = std::min(hy, 2.0 * std::pow(options_.interp_tol * kChebConst / amp, 1.0 / kOrder) / gam);
  }
  x_step_ = options_.x_step > 0.0 ? options_.x_step : hx;
  const double hy_target = options_.box_height > 0.0 ? options_.box_height : hy;
  boxes_y_ = std::max(1, int(std::ceil((ymax - ymin) / hy_target - 1e-9)));
  box_height_ = (ymax - ymin) / boxes_y_;
  y_low_ = ymin;
  l_min_ = int(std::floor((xmin - x0_) / x_step_)) - kHalf - 1;
  const int l_max = int(std::ceil((xmax - x0_) / x_step_)) + kHalf + 1;
  nx_ = l_max - l_min_ + 1;

  // 2p+1 circle samples unless modes above p are still visible at k R, in
  // which case more samples keep them from aliasing onto the retained ones.
  double rmax = 0.0;
  for (const auto& inst : instances_) rmax = std::max(rmax, inst.R);
  int half = p_;
  while (half < p_ + 64 && std::abs(numerics::bessel_j(half + 1, k2_ * rmax)) > 1e-17) ++half;
  nsamp_ = 2 * half + 1;
  const int np = 2 * p_ + 1;
  const int ns = nsamp_;
  active_.assign(boxes_y_, 0);
  samples_.resize(instances_.size() * ns);
  for (std::size_t m = 0; m < instances_.size(); ++m) {
    const auto& inst = instances_[m];
    for (int i = 0; i < ns; ++i) {
      const double phi = kTwoPi * i / ns;
      const Vec2 pt{inst.center.x + inst.R * std::cos(phi), inst.center.y + inst.R * std::sin(phi)};
      Sample& s = samples_[m * ns + i];
      const double u = (pt.x - x0_) / x_step_ - l_min_;
      s.col = int(std::floor(u)) - (kHalf - 1);
      lagrange_weights(u - s.col, s.wx);
      s.box = std::clamp(int(std::floor((pt.y - y_low_) / box_height_)), 0, boxes_y_ - 1);
      const double a = y_low_ + s.box * box_height_;
      numerics::barycentric_row(kOrder, a, a + box_height_, pt.y, std::span<double>(s.wy, kOrder));
      active_[s.box] = 1;
    }
  }

  auto make_plan = [&](const std::vector<int>& nodes, std::vector<double>& env) {
    std::vector<double> pts(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      pts[i] = wrap_angle(contour.nodes[nodes[i]].real() * x_step_);
    const double im = contour.nodes[nodes.front()].imag();
    env.resize(nx_);
    for (int c = 0; c < nx_; ++c) env[c] = std::exp(-im * (l_min_ + c) * x_step_);
    return std::make_unique<numerics::NufftPlan>(pts, l_min_, nx_, options_.nufft_tol);
  };
  if (!tail3_.empty()) plan3_ = make_plan(tail3_, env3_);
  if (!tail1_.empty()) plan1_ = make_plan(tail1_, env1_);
  mid_table_.resize(mid_.size() * nx_);
  for (std::size_t i = 0; i < mid_.size(); ++i) {
    const cplx lam = contour.nodes[mid_[i]];
    for (int c = 0; c < nx_; ++c)
      mid_table_[i * nx_ + c] = std::exp(-lam.imag() * (l_min_ + c) * x_step_);
  }

  dft_.resize(std::size_t(np) * ns);
  for (int n = -p_; n <= p_; ++n)
    for (int i = 0; i < ns; ++i)
      dft_[std::size_t(n + p_) * ns + i] = std::exp(-kI * (kTwoPi * n * i / ns)) / double(ns);
  proj_j_.resize(instances_.size() * np);
  proj_dj_.resize(instances_.size() * np);
  std::vector<cplx> jv(p_ + 2);
  for (std::size_t m = 0; m < instances_.size(); ++m) {
    const cplx z = k2_ * instances_[m].R;
    numerics::bessel_j_array(p_ + 1, z, jv);
    for (int n = 0; n <= p_; ++n) {
      const cplx jn = jv[n];
      // J_n' = J_{n-1} - n J_n / z, with J_{-1} = -J_1.
      const cplx jm1 = n == 0 ? -jv[1] : jv[n - 1];
      const cplx djn = k2_ * (jm1 - double(n) * jn / z);
      const double sgn = (n % 2) ? -1.0 : 1.0;
      proj_j_[m * np + p_ + n] = jn;
      proj_dj_[m * np + p_ + n] = djn;
      proj_j_[m * np + p_ - n] = sgn * jn;
      proj_dj_[m * np + p_ - n] = sgn * djn;
    }
  }
}

void CouplingContext::setup_snap() {
  const auto& contour = solver_->contour();
  double delta = 1e300, rmax = 0.0;
  for (const auto& inst : instances_) {
    delta = std::min({delta, -inst.center.y, inst.center.y + d_});
    rmax = std::max(rmax, inst.R);
  }
  double hs = options_.snap_step;
  if (!(hs > 0.0)) {
    const double rho = std::pow(options_.snap_tol, 1.0 / (2 * p_ + 1));
    double smax = (rho * delta - rmax) / (1.0 + rho);
    smax = std::max(smax, 0.02 * delta);
    hs = smax * std::sqrt(2.0);
  }
  snap_step_ = hs;

  const std::size_t M = instances_.size();
  snap_a_.resize(M);
  snap_row_.resize(M);
  double smax = 0.0, node_delta = 1e300;
  std::map<int, std::vector<int>> rows;
  for (std::size_t m = 0; m < M; ++m) {
    const Vec2 c = instances_[m].center;
    snap_a_[m] = int(std::lround((c.x - x0_) / hs));
    snap_row_[m] = int(std::lround(c.y / hs));
    const Vec2 node{x0_ + snap_a_[m] * hs, snap_row_[m] * hs};
    smax = std::max(smax, norm(c - node));
    node_delta = std::min({node_delta, -node.y, node.y + d_});
    rows[snap_row_[m]].push_back(int(m));
  }
  if (!(node_delta > smax + rmax))
    throw ConfigError("coupling: snap step too coarse for the interface standoff");
  const double rho = (smax + rmax) / (node_delta - smax);
  snap_p_ = p_;
  if (rho > 0.0 && smax > 0.0)
    snap_p_ = std::max(p_, int(std::ceil(std::log(options_.snap_tol) / std::log(rho))));
  snap_p_ = std::min(snap_p_, p_ + 64);

  for (auto& [r, members] : rows) {
    row_ids_.push_back(r);
    row_members_.push_back(std::move(members));
  }
  int amin = snap_a_.front(), amax = snap_a_.front();
  for (int a : snap_a_) {
    amin = std::min(amin, a);
    amax = std::max(amax, a);
  }
  a_min_ = amin;
  na_ = amax - amin + 1;

  const int P = p_ + snap_p_;
  const int nt = 2 * P + 1;
  shift_tables_.assign(M * nt, 0.0);
  std::vector<cplx> jv(P + 1);
  for (std::size_t m = 0; m < M; ++m) {
    const Vec2 node{x0_ + snap_a_[m] * hs, snap_row_[m] * hs};
    const Vec2 s = instances_[m].center - node;
    cplx* t = &shift_tables_[m * nt];
    const double r = norm(s);
    if (r == 0.0) {
      t[P] = 1.0;
      continue;
    }
    numerics::bessel_j_array(P, k2_ * r, jv);
    const double th = angle(s);
    for (int q = 0; q <= P; ++q) {
      const double sgn = (q % 2) ? -1.0 : 1.0;
      t[P + q] = jv[q] * std::exp(-kI * (q * th));
      t[P - q] = sgn * jv[q] * std::exp(kI * (q * th));
    }
  }

  const int nq = 2 * snap_p_ + 1;
  auto tables = [&](const std::vector<int>& nodes, CVector& plus, CVector& minus,
                    std::vector<double>& env) {
    const std::size_t n = nodes.size();
    plus.resize(nq * n);
    minus.resize(nq * n);
    std::vector<cplx> pw(nq), mw(nq);
    for (std::size_t i = 0; i < n; ++i) {
      const cplx lam = contour.nodes[nodes[i]];
      const cplx g = solver_->gamma2(nodes[i]);
      fill_powers(-kI * (lam - g) / k2_, snap_p_, pw.data());
      fill_powers(-kI * (lam + g) / k2_, snap_p_, mw.data());
      for (int q = 0; q < nq; ++q) {
        plus[q * n + i] = pw[q];
        minus[q * n + i] = mw[q];
      }
    }
    std::vector<double> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = wrap_angle(-contour.nodes[nodes[i]].real() * hs);
    const double im = contour.nodes[nodes.front()].imag();
    env.resize(na_);
    for (int a = 0; a < na_; ++a) env[a] = std::exp(im * (a_min_ + a) * hs);
    return std::make_unique<numerics::NufftPlan>(pts, a_min_, na_, options_.nufft_tol);
  };
  if (!tail3_.empty()) snap_plan3_ = tables(tail3_, snap_plus3_, snap_minus3_, snap_env3_);
  if (!tail1_.empty()) snap_plan1_ = tables(tail1_, snap_plus1_, snap_minus1_, snap_env1_);
}

CVector CouplingContext::sommerfeld_to_local_direct(const SpectralDensities& dens) const {
  if (dens.size() != solver_->size()) throw ConfigError("coupling: density size mismatch");
  const auto& kern = simd::kernels();
  const auto& contour = solver_->contour();
  const int np = 2 * p_ + 1;
  CVector alpha(instances_.size() * np, 0.0);
  for (std::size_t j = 0; j < contour.size(); ++j) {
    const cplx lam = contour.nodes[j];
    const cplx g = solver_->gamma2(j);
    const cplx sp = wscale_[j] / g * dens.values[j][1];
    const cplx sm = wscale_[j] / g * dens.values[j][2];
    if (sp == 0.0 && sm == 0.0) continue;
    for (std::size_t m = 0; m < instances_.size(); ++m) {
      const Vec2 c = instances_[m].center;
      const cplx ph = kI * lam * (c.x - x0_);
      const cplx a = sp * std::exp(ph + g * c.y);
      const cplx b = sm * std::exp(ph - g * (c.y + d_));
      kern.axpy(a, &local_plus_[j * np], &alpha[m * np], np);
      kern.axpy(b, &local_minus_[j * np], &alpha[m * np], np);
    }
  }
  return alpha;
}

InterpGrid CouplingContext::build_interp_grid(const SpectralDensities& dens) const {
  if (dens.size() != solver_->size()) throw ConfigError("coupling: density size mismatch");
  InterpGrid grid;
  grid.x_origin = x0_;
  grid.x_step = x_step_;
  grid.l_min = l_min_;
  grid.nx = nx_;
  grid.y_low = y_low_;
  grid.box_height = box_height_;
  grid.boxes_y = boxes_y_;
  grid.order = kOrder;
  grid.active = active_;
  if (instances_.empty()) return grid;
  const std::size_t total = grid.rows() * nx_;
  grid.value.assign(total, 0.0);
  grid.dx.assign(total, 0.0);
  grid.dy.assign(total, 0.0);

  const auto& kern = simd::kernels();
  const auto& contour = solver_->contour();
  CVector strengths, modes(3 * std::size_t(nx_));

  auto tail = [&](const std::vector<int>& nodes, const numerics::NufftPlan& plan,
                  const std::vector<double>& env, double y, std::size_t off) {
    const std::size_t n = nodes.size();
    strengths.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const int j = nodes[i];
      const cplx g = solver_->gamma2(j);
      const cplx top = dens.values[j][1] * std::exp(g * y);
      const cplx bot = dens.values[j][2] * std::exp(-g * (y + d_));
      const cplx v = wscale_[j] / g * (top + bot);
      strengths[i] = v;
      strengths[n + i] = kI * contour.nodes[j] * v;
      strengths[2 * n + i] = wscale_[j] * (top - bot);
    }
    plan.type1(strengths.data(), modes.data(), 3);
    for (int c = 0; c < nx_; ++c) {
      grid.value[off + c] += env[c] * modes[c];
      grid.dx[off + c] += env[c] * modes[nx_ + c];
      grid.dy[off + c] += env[c] * modes[2 * nx_ + c];
    }
  };

  for (int box = 0; box < boxes_y_; ++box) {
    if (!active_[box]) continue;
    const double a = y_low_ + box * box_height_;
    const auto ys = numerics::chebyshev_points(kOrder, a, a + box_height_);
    for (int q = 0; q < kOrder; ++q) {
      const double y = ys[q];
      const std::size_t off = (std::size_t(box) * kOrder + q) * nx_;
      if (plan3_) tail(tail3_, *plan3_, env3_, y, off);
      if (plan1_) tail(tail1_, *plan1_, env1_, y, off);
      for (std::size_t i = 0; i < mid_.size(); ++i) {
        const int j = mid_[i];
        const cplx g = solver_->gamma2(j);
        const cplx top = dens.values[j][1] * std::exp(g * y);
        const cplx bot = dens.values[j][2] * std::exp(-g * (y + d_));
        const cplx v = wscale_[j] / g * (top + bot);
        const double* row = &mid_table_[i * nx_];
        kern.axpy_real(v, row, &grid.value[off], nx_);
        kern.axpy_real(kI * contour.nodes[j] * v, row, &grid.dx[off], nx_);
        kern.axpy_real(wscale_[j] * (top - bot), row, &grid.dy[off], nx_);
      }
    }
  }
  return grid;
}

CVector CouplingContext::sommerfeld_to_local_nufft(const InterpGrid& grid) const {
  const int np = 2 * p_ + 1;
  CVector alpha(instances_.size() * np, 0.0);
  if (instances_.empty()) return alpha;
  if (grid.nx != nx_ || grid.boxes_y != boxes_y_ || grid.l_min != l_min_ ||
      grid.x_step != x_step_ || grid.box_height != box_height_)
    throw ConfigError("coupling: interpolation grid does not belong to this context");
  const auto& kern = simd::kernels();
  const int ns = nsamp_;
  CVector u(ns), ur(ns);
  for (std::size_t m = 0; m < instances_.size(); ++m) {
    for (int i = 0; i < ns; ++i) {
      const Sample& s = samples_[m * ns + i];
      cplx v = 0.0, gx = 0.0, gy = 0.0;
      for (int q = 0; q < kOrder; ++q) {
        const std::size_t off = (std::size_t(s.box) * kOrder + q) * nx_ + s.col;
        v += s.wy[q] * kern.dot_real(s.wx, &grid.value[off], kOrder);
        gx += s.wy[q] * kern.dot_real(s.wx, &grid.dx[off], kOrder);
        gy += s.wy[q] * kern.dot_real(s.wx, &grid.dy[off], kOrder);
      }
      const double phi = kTwoPi * i / ns;
      u[i] = v;
      ur[i] = std::cos(phi) * gx + std::sin(phi) * gy;
    }
    for (int n = 0; n < np; ++n) {
      const cplx* row = &dft_[std::size_t(n) * ns];
      const cplx a = kern.dot(row, u.data(), ns);
      const cplx b = kern.dot(row, ur.data(), ns);
      const cplx jn = proj_j_[m * np + n];
      const cplx djn = proj_dj_[m * np + n];
      alpha[m * np + n] =
          (a * std::conj(jn) + b * std::conj(djn)) / (std::norm(jn) + std::norm(djn));
    }
  }
  return alpha;
}

CVector CouplingContext::sommerfeld_to_local_nufft(const SpectralDensities& dens) const {
  return sommerfeld_to_local_nufft(build_interp_grid(dens));
}

CVector CouplingContext::sommerfeld_to_local(const SpectralDensities& dens,
                                             CouplingPath path) const {
  return use_nufft(path) ? sommerfeld_to_local_nufft(dens) : sommerfeld_to_local_direct(dens);
}

SpectralUpdate CouplingContext::multipole_to_sommerfeld_direct(const CVector& beta) const {
  const int np = 2 * p_ + 1;
  if (beta.size() != instances_.size() * np) throw ConfigError("coupling: beta size mismatch");
  const auto& kern = simd::kernels();
  const auto& contour = solver_->contour();
  SpectralUpdate up;
  up.plus.assign(contour.size(), 0.0);
  up.minus.assign(contour.size(), 0.0);
  for (std::size_t j = 0; j < contour.size(); ++j) {
    const cplx lam = contour.nodes[j];
    const cplx g = solver_->gamma2(j);
    cplx sp = 0.0, sm = 0.0;
    for (std::size_t m = 0; m < instances_.size(); ++m) {
      const Vec2 c = instances_[m].center;
      const cplx ph = -kI * lam * (c.x - x0_);
      sp += std::exp(ph + g * c.y) * kern.dot(&beta[m * np], &out_plus_[j * np], np);
      sm += std::exp(ph - g * (d_ + c.y)) * kern.dot(&beta[m * np], &out_minus_[j * np], np);
    }
    up.plus[j] = -4.0 * kI * sp;
    up.minus[j] = -4.0 * kI * sm;
  }
  return up;
}

SpectralUpdate CouplingContext::multipole_to_sommerfeld_nufft(const CVector& beta) const {
  const int np = 2 * p_ + 1;
  if (beta.size() != instances_.size() * np) throw ConfigError("coupling: beta size mismatch");
  const auto& kern = simd::kernels();
  const auto& contour = solver_->contour();
  SpectralUpdate up;
  up.plus.assign(contour.size(), 0.0);
  up.minus.assign(contour.size(), 0.0);
  if (instances_.empty()) return up;

  const int P = p_ + snap_p_;
  const int nt = 2 * P + 1;
  const int nq = 2 * snap_p_ + 1;
  CVector shifted(instances_.size() * nq, 0.0);
  for (std::size_t m = 0; m < instances_.size(); ++m) {
    const cplx* t = &shift_tables_[m * nt];
    const cplx* b = &beta[m * np];
    cplx* out = &shifted[m * nq];
    for (int q = -snap_p_; q <= snap_p_; ++q) {
      cplx acc = 0.0;
      for (int n = -p_; n <= p_; ++n) acc += b[n + p_] * t[P + q - n];
      out[q + snap_p_] = acc;
    }
  }

  CVector coef(std::size_t(nq) * na_), vals, accp, accm;
  auto tail = [&](const std::vector<int>& nodes, const numerics::NufftPlan& plan,
                  const std::vector<double>& env, const CVector& tplus, const CVector& tminus,
                  const std::vector<int>& members, double y) {
    const std::size_t n = nodes.size();
    std::fill(coef.begin(), coef.end(), cplx(0.0));
    for (int m : members) {
      const int a = snap_a_[m] - a_min_;
      for (int q = 0; q < nq; ++q) coef[std::size_t(q) * na_ + a] += shifted[m * nq + q] * env[a];
    }
    vals.resize(std::size_t(nq) * n);
    plan.type2(coef.data(), vals.data(), nq);
    accp.assign(n, 0.0);
    accm.assign(n, 0.0);
    for (int q = 0; q < nq; ++q) {
      kern.mul_acc(&tplus[q * n], &vals[q * n], accp.data(), n);
      kern.mul_acc(&tminus[q * n], &vals[q * n], accm.data(), n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int j = nodes[i];
      const cplx g = solver_->gamma2(j);
      up.plus[j] += std::exp(g * y) * accp[i];
      up.minus[j] += std::exp(-g * (d_ + y)) * accm[i];
    }
  };
  for (std::size_t r = 0; r < row_ids_.size(); ++r) {
    const double y = row_ids_[r] * snap_step_;
    if (snap_plan3_)
      tail(tail3_, *snap_plan3_, snap_env3_, snap_plus3_, snap_minus3_, row_members_[r], y);
    if (snap_plan1_)
      tail(tail1_, *snap_plan1_, snap_env1_, snap_plus1_, snap_minus1_, row_members_[r], y);
  }
  for (int j : mid_) {
    const cplx lam = contour.nodes[j];
    const cplx g = solver_->gamma2(j);
    cplx sp = 0.0, sm = 0.0;
    for (std::size_t m = 0; m < instances_.size(); ++m) {
      const Vec2 c = instances_[m].center;
      const cplx ph = -kI * lam * (c.x - x0_);
      sp += std::exp(ph + g * c.y) * kern.dot(&beta[m * np], &out_plus_[j * np], np);
      sm += std::exp(ph - g * (d_ + c.y)) * kern.dot(&beta[m * np], &out_minus_[j * np], np);
    }
    up.plus[j] += sp;
    up.minus[j] += sm;
  }
  for (std::size_t j = 0; j < contour.size(); ++j) {
    up.plus[j] *= -4.0 * kI;
    up.minus[j] *= -4.0 * kI;
  }
  return up;
}

SpectralUpdate CouplingContext::multipole_to_sommerfeld(const CVector& beta,
                                                        CouplingPath path) const {
  return use_nufft(path) ? multipole_to_sommerfeld_nufft(beta)
                         : multipole_to_sommerfeld_direct(beta);
}

}  // namespace layerscatter
