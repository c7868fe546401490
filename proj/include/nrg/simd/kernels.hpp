#pragma once

// Dense double-precision inner loops used by the tensor engine.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant. The variant is chosen once per process from the CPU feature bits
// (override with NRG_KERNELS=scalar|avx2). The two variants are not
// bit-identical (FMA rounds once, lane sums reassociate); tests pin their
// agreement to a relative tolerance instead.

#include <cstddef>
#include <string_view>

namespace nrg::simd {

struct KernelTable {
  std::string_view name;

  // c[m x n] += a[m x k] * b[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // c[m x n] += a[m x k] * b[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // c[m x n] += a[k x m]^T * b[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);

  double (*dot)(std::size_t n, const double* a, const double* b);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // out = a * b (elementwise)
  void (*mul)(std::size_t n, const double* a, const double* b, double* out);
};

enum class Variant { kScalar, kAvx2 };

const KernelTable& scalar_kernels();

// nullptr when the build has no AVX2 variant or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// Kernels in use by the tensor engine.
const KernelTable& active();

// Switch the process-wide variant. Returns false (and leaves the selection
// unchanged) if the variant is not available on this machine.
bool select(Variant v);

}  // namespace nrg::simd
