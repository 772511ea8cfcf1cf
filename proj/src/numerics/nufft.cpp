#include "layerscatter/numerics/nufft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "layerscatter/error.hpp"
#include "layerscatter/simd/kernels.hpp"

namespace layerscatter::numerics {
namespace {

int next_smooth(int n) {
  for (;; ++n) {
    int m = n;
    for (int f : {2, 3, 5}) {
      while (m % f == 0) m /= f;
    }
    if (m == 1 && n % 2 == 0) return n;
  }
}

}  // namespace

struct NufftPlan::Fft {
  fftw_plan plan = nullptr;
  int n = 0;
  explicit Fft(int size) : n(size) {
    auto* buf = fftw_alloc_complex(size);
    plan = fftw_plan_dft_1d(size, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
  }
  ~Fft() {
    if (plan != nullptr) fftw_destroy_plan(plan);
  }
  void run(cplx* data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan, p, p);
  }
};

int nufft_half_width(double tol) {
  return std::max(2, int(std::ceil((3.4 - std::log(tol)) / (kPi * 0.75))));
}

NufftPlan::NufftPlan(std::span<const double> points, int kmin, int nmodes, double tol)
    : npts_(int(points.size())), nmodes_(nmodes), kmin_(kmin) {
  if (!(tol >= 1e-14 && tol <= 1e-4)) throw ConfigError("nufft: tol must lie in [1e-14, 1e-4]");
  if (npts_ < 1 || nmodes_ < 1) throw ConfigError("nufft: need at least one point and one mode");
  width_ = nufft_half_width(tol);
  grid_ = next_smooth(std::max(2 * nmodes_, 2 * width_ + 2));
  const double ratio = double(grid_) / nmodes_;
  tau_ = kPi * width_ / (double(nmodes_) * nmodes_ * ratio * (ratio - 0.5));
  kshift_ = kmin_ + nmodes_ / 2;

  const double hg = kTwoPi / grid_;
  const int span_len = 2 * width_;
  start_.resize(npts_);
  weights_.resize(std::size_t(npts_) * span_len);
  for (int j = 0; j < npts_; ++j) {
    const double x = points[j];
    if (!(x >= 0.0 && x < kTwoPi)) throw DomainError("nufft: point outside [0, 2pi)");
    const int l0 = std::min(int(std::floor(x / hg)), grid_ - 1);
    start_[j] = l0 + 1;
    double* w = &weights_[std::size_t(j) * span_len];
    for (int q = 0; q < span_len; ++q) {
      const double dist = x - (l0 - width_ + 1 + q) * hg;
      w[q] = std::exp(-dist * dist / (4.0 * tau_));
    }
  }
  if (kshift_ != 0) {
    phase_.resize(npts_);
    for (int j = 0; j < npts_; ++j) phase_[j] = std::exp(kI * (double(kshift_) * points[j]));
  }
  deconv_.resize(nmodes_);
  const double scale = hg / std::sqrt(4.0 * kPi * tau_);
  for (int m = 0; m < nmodes_; ++m) {
    const double kc = double(kmin_ + m - kshift_);
    deconv_[m] = scale * std::exp(kc * kc * tau_);
  }
  fft_ = std::make_unique<Fft>(grid_);
}

NufftPlan::~NufftPlan() = default;
NufftPlan::NufftPlan(NufftPlan&&) noexcept = default;
NufftPlan& NufftPlan::operator=(NufftPlan&&) noexcept = default;

void NufftPlan::type1(const cplx* strengths, cplx* modes, int nvec) const {
  const auto& k = simd::kernels();
  const int span_len = 2 * width_;
  const int ext_len = grid_ + span_len;
  std::vector<cplx> ext(std::size_t(nvec) * ext_len);
  for (int j = 0; j < npts_; ++j) {
    const double* w = &weights_[std::size_t(j) * span_len];
    const cplx ph = phase_.empty() ? cplx(1.0) : phase_[j];
    for (int v = 0; v < nvec; ++v) {
      const cplx c = strengths[std::size_t(v) * npts_ + j] * ph;
      k.axpy_real(c, w, &ext[std::size_t(v) * ext_len + start_[j]], span_len);
    }
  }
  std::vector<cplx> grid(grid_);
  for (int v = 0; v < nvec; ++v) {
    const cplx* e = &ext[std::size_t(v) * ext_len];
    std::copy(e + width_, e + width_ + grid_, grid.begin());
    for (int i = 0; i < width_; ++i) grid[grid_ - width_ + i] += e[i];
    for (int i = 0; i < width_; ++i) grid[i] += e[width_ + grid_ + i];
    fft_->run(grid.data());
    cplx* out = modes + std::size_t(v) * nmodes_;
    for (int m = 0; m < nmodes_; ++m) {
      int idx = (kmin_ + m - kshift_) % grid_;
      if (idx < 0) idx += grid_;
      out[m] = grid[idx] * deconv_[m];
    }
  }
}

void NufftPlan::type2(const cplx* modes, cplx* values, int nvec) const {
  const auto& k = simd::kernels();
  const int span_len = 2 * width_;
  const int ext_len = grid_ + span_len;
  std::vector<cplx> ext(std::size_t(nvec) * ext_len);
  std::vector<cplx> grid(grid_);
  for (int v = 0; v < nvec; ++v) {
    std::fill(grid.begin(), grid.end(), cplx(0.0));
    const cplx* in = modes + std::size_t(v) * nmodes_;
    for (int m = 0; m < nmodes_; ++m) {
      int idx = (kmin_ + m - kshift_) % grid_;
      if (idx < 0) idx += grid_;
      grid[idx] = in[m] * deconv_[m];
    }
    fft_->run(grid.data());
    cplx* e = &ext[std::size_t(v) * ext_len];
    for (int i = 0; i < ext_len; ++i) e[i] = grid[((i - width_) % grid_ + grid_) % grid_];
  }
  for (int j = 0; j < npts_; ++j) {
    const double* w = &weights_[std::size_t(j) * span_len];
    const cplx ph = phase_.empty() ? cplx(1.0) : phase_[j];
    for (int v = 0; v < nvec; ++v) {
      values[std::size_t(v) * npts_ + j] =
          ph * k.dot_real(w, &ext[std::size_t(v) * ext_len + start_[j]], span_len);
    }
  }
}

CVector nufft_1d(std::span<const double> points, std::span<const cplx> input, int kmin,
                 int nmodes, NufftType type, double tol) {
  NufftPlan plan(points, kmin, nmodes, tol);
  if (type == NufftType::Type1) {
    if (input.size() != points.size()) throw ConfigError("nufft: strength count mismatch");
    CVector out(nmodes);
    plan.type1(input.data(), out.data());
    return out;
  }
  if (int(input.size()) != nmodes) throw ConfigError("nufft: mode count mismatch");
  CVector out(points.size());
  plan.type2(input.data(), out.data());
  return out;
}

}  // namespace layerscatter::numerics
