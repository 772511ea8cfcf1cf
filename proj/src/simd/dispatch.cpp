#include <cstdlib>
#include <string_view>

#include "layerscatter/simd/kernels.hpp"

namespace layerscatter::simd {

#ifdef LAYERSCATTER_HAVE_AVX2
extern const KernelTable kAvx2Table;
#endif

const KernelTable* avx2_kernels() {
#if defined(LAYERSCATTER_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? &kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& kernels() {
  static const KernelTable* selected = [] {
    const char* env = std::getenv("LAYERSCATTER_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return &scalar_kernels();
    const KernelTable* fast = avx2_kernels();
    return fast != nullptr ? fast : &scalar_kernels();
  }();
  return *selected;
}

}  // namespace layerscatter::simd
