#pragma once

#include <memory>
#include <span>
#include <vector>

#include "layerscatter/types.hpp"

namespace layerscatter::numerics {

enum class NufftType { Type1, Type2 };

// 1-D nonuniform FFT by Gaussian gridding with oversampling 2.
//   type 1:  F_k = sum_j c_j e^{i k x_j},   k = kmin .. kmin + nmodes - 1
//   type 2:  v_j = sum_k f_k e^{i k x_j}
// Points must lie in [0, 2pi). The plan caches the spreading weights so that
// many strength vectors can share one set of points.
class NufftPlan {
 public:
  NufftPlan(std::span<const double> points, int kmin, int nmodes, double tol);
  ~NufftPlan();
  NufftPlan(NufftPlan&&) noexcept;
  NufftPlan& operator=(NufftPlan&&) noexcept;

  int num_points() const { return npts_; }
  int num_modes() const { return nmodes_; }
  int kmin() const { return kmin_; }
  int half_width() const { return width_; }
  int grid_size() const { return grid_; }

  // strengths: nvec x npts (vector-major); modes: nvec x nmodes.
  void type1(const cplx* strengths, cplx* modes, int nvec = 1) const;
  // modes: nvec x nmodes; values: nvec x npts.
  void type2(const cplx* modes, cplx* values, int nvec = 1) const;

 private:
  struct Fft;
  int npts_ = 0;
  int nmodes_ = 0;
  int kmin_ = 0;
  int kshift_ = 0;
  int width_ = 0;
  int grid_ = 0;
  double tau_ = 0.0;
  std::vector<int> start_;
  std::vector<double> weights_;  // npts x 2*width
  std::vector<cplx> phase_;      // e^{i kshift x_j}, empty when kshift == 0
  std::vector<double> deconv_;   // per mode, index k - kmin
  std::unique_ptr<Fft> fft_;
};

int nufft_half_width(double tol);

CVector nufft_1d(std::span<const double> points, std::span<const cplx> input, int kmin,
                 int nmodes, NufftType type, double tol);

}  // namespace layerscatter::numerics
