#include <immintrin.h>

#include "layerscatter/simd/kernels.hpp"

namespace layerscatter::simd {
namespace {

inline cplx hsum2(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  alignas(16) double out[2];
  _mm_store_pd(out, s);
  return {out[0], out[1]};
}

void axpy_real(cplx c, const double* w, cplx* y, std::size_t n) {
  auto* yd = reinterpret_cast<double*>(y);
  const __m256d cv = _mm256_setr_pd(c.real(), c.imag(), c.real(), c.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d wv = _mm256_setr_pd(w[i], w[i], w[i + 1], w[i + 1]);
    const __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    _mm256_storeu_pd(yd + 2 * i, _mm256_fmadd_pd(cv, wv, yv));
  }
  for (; i < n; ++i) y[i] += c * w[i];
}

cplx dot_real(const double* w, const cplx* x, std::size_t n) {
  const auto* xd = reinterpret_cast<const double*>(x);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d w0 = _mm256_setr_pd(w[i], w[i], w[i + 1], w[i + 1]);
    const __m256d w1 = _mm256_setr_pd(w[i + 2], w[i + 2], w[i + 3], w[i + 3]);
    acc0 = _mm256_fmadd_pd(w0, _mm256_loadu_pd(xd + 2 * i), acc0);
    acc1 = _mm256_fmadd_pd(w1, _mm256_loadu_pd(xd + 2 * i + 4), acc1);
  }
  for (; i + 2 <= n; i += 2) {
    const __m256d w0 = _mm256_setr_pd(w[i], w[i], w[i + 1], w[i + 1]);
    acc0 = _mm256_fmadd_pd(w0, _mm256_loadu_pd(xd + 2 * i), acc0);
  }
  cplx s = hsum2(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += w[i] * x[i];
  return s;
}

cplx dot(const cplx* a, const cplx* b, std::size_t n) {
  const auto* ad = reinterpret_cast<const double*>(a);
  const auto* bd = reinterpret_cast<const double*>(b);
  // same: (ar*br, ai*bi), cross: (ar*bi, ai*br)
  __m256d same = _mm256_setzero_pd();
  __m256d cross = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d av = _mm256_loadu_pd(ad + 2 * i);
    const __m256d bv = _mm256_loadu_pd(bd + 2 * i);
    same = _mm256_fmadd_pd(av, bv, same);
    cross = _mm256_fmadd_pd(av, _mm256_permute_pd(bv, 0b0101), cross);
  }
  alignas(32) double s[4], c[4];
  _mm256_store_pd(s, same);
  _mm256_store_pd(c, cross);
  double re = (s[0] + s[2]) - (s[1] + s[3]);
  double im = (c[0] + c[2]) + (c[1] + c[3]);
  for (; i < n; ++i) {
    re += a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
    im += a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
  }
  return {re, im};
}

void axpy(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
  const auto* xd = reinterpret_cast<const double*>(x);
  auto* yd = reinterpret_cast<double*>(y);
  const __m256d ar = _mm256_set1_pd(alpha.real());
  const __m256d ai = _mm256_set1_pd(alpha.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    const __m256d sw = _mm256_mul_pd(_mm256_permute_pd(xv, 0b0101), ai);
    const __m256d prod = _mm256_fmaddsub_pd(xv, ar, sw);
    _mm256_storeu_pd(yd + 2 * i, _mm256_add_pd(_mm256_loadu_pd(yd + 2 * i), prod));
  }
  for (; i < n; ++i) {
    const double re = alpha.real() * x[i].real() - alpha.imag() * x[i].imag();
    const double im = alpha.real() * x[i].imag() + alpha.imag() * x[i].real();
    y[i] = {y[i].real() + re, y[i].imag() + im};
  }
}

void mul_acc(const cplx* a, const cplx* b, cplx* y, std::size_t n) {
  const auto* ad = reinterpret_cast<const double*>(a);
  const auto* bd = reinterpret_cast<const double*>(b);
  auto* yd = reinterpret_cast<double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d av = _mm256_loadu_pd(ad + 2 * i);
    const __m256d bv = _mm256_loadu_pd(bd + 2 * i);
    const __m256d br = _mm256_movedup_pd(bv);
    const __m256d bi = _mm256_permute_pd(bv, 0b1111);
    const __m256d sw = _mm256_mul_pd(_mm256_permute_pd(av, 0b0101), bi);
    const __m256d prod = _mm256_fmaddsub_pd(av, br, sw);
    _mm256_storeu_pd(yd + 2 * i, _mm256_add_pd(_mm256_loadu_pd(yd + 2 * i), prod));
  }
  for (; i < n; ++i) {
    const double re = a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
    const double im = a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
    y[i] = {y[i].real() + re, y[i].imag() + im};
  }
}

}  // namespace

extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{"avx2", axpy_real, dot_real, dot, axpy, mul_acc};

}  // namespace layerscatter::simd
