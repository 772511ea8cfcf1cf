#pragma once

#include <cstddef>

#include "layerscatter/types.hpp"

namespace layerscatter::simd {

// Complex vectors are interleaved (re, im) as std::complex<double>.
struct KernelTable {
  const char* name;
  // y[i] += c * w[i]
  void (*axpy_real)(cplx c, const double* w, cplx* y, std::size_t n);
  // sum_i w[i] * x[i]
  cplx (*dot_real)(const double* w, const cplx* x, std::size_t n);
  // sum_i a[i] * b[i]  (no conjugation)
  cplx (*dot)(const cplx* a, const cplx* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(cplx alpha, const cplx* x, cplx* y, std::size_t n);
  // y[i] += a[i] * b[i]
  void (*mul_acc)(const cplx* a, const cplx* b, cplx* y, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the CPU lacks AVX2/FMA or the build omitted them.
const KernelTable* avx2_kernels();
// Selected once: AVX2 when available unless LAYERSCATTER_SIMD=scalar.
const KernelTable& kernels();

// y_v += sum_{n=-p..p} t[n - v + 2p] x[n + p],  v = -p..p; t has 4p+1 entries.
void toeplitz_accumulate(const KernelTable& k, const cplx* t, const cplx* x, cplx* y, int p);

}  // namespace layerscatter::simd
