#include "layerscatter/simd/kernels.hpp"

namespace layerscatter::simd {
namespace {

void axpy_real(cplx c, const double* w, cplx* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += c * w[i];
}

cplx dot_real(const double* w, const cplx* x, std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    re += w[i] * x[i].real();
    im += w[i] * x[i].imag();
  }
  return {re, im};
}

cplx dot(const cplx* a, const cplx* b, std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    re += a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
    im += a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
  }
  return {re, im};
}

void axpy(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double re = alpha.real() * x[i].real() - alpha.imag() * x[i].imag();
    const double im = alpha.real() * x[i].imag() + alpha.imag() * x[i].real();
    y[i] = {y[i].real() + re, y[i].imag() + im};
  }
}

void mul_acc(const cplx* a, const cplx* b, cplx* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double re = a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
    const double im = a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
    y[i] = {y[i].real() + re, y[i].imag() + im};
  }
}

const KernelTable kScalar{"scalar", axpy_real, dot_real, dot, axpy, mul_acc};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

void toeplitz_accumulate(const KernelTable& k, const cplx* t, const cplx* x, cplx* y, int p) {
  const std::size_t len = 2 * p + 1;
  for (int v = -p; v <= p; ++v) y[v + p] += k.dot(t + (p - v), x, len);
}

}  // namespace layerscatter::simd
