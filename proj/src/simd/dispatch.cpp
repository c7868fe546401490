#include <cstdlib>
#include <string_view>

#include "nrg/simd/kernels.hpp"

namespace nrg::simd {

#if defined(NRG_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(NRG_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  if (supported) return &avx2_kernel_table();
#endif
  return nullptr;
}

namespace {

const KernelTable* initial_selection() {
  const char* env = std::getenv("NRG_KERNELS");
  const std::string_view want = env ? env : "auto";
  if (want == "scalar") return &scalar_kernels();
  if (const KernelTable* fast = avx2_kernels()) return fast;
  return &scalar_kernels();
}

const KernelTable*& current() {
  static const KernelTable* table = initial_selection();
  return table;
}

}  // namespace

const KernelTable& active() { return *current(); }

bool select(Variant v) {
  if (v == Variant::kScalar) {
    current() = &scalar_kernels();
    return true;
  }
  const KernelTable* fast = avx2_kernels();
  if (!fast) return false;
  current() = fast;
  return true;
}

}  // namespace nrg::simd
