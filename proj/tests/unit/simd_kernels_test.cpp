#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nrg/simd/kernels.hpp"

namespace {

using nrg::simd::KernelTable;

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Textbook triple loop, independent of both kernel variants.
std::vector<double> naive_gemm(std::size_t m, std::size_t n, std::size_t k, const std::vector<double>& a,
                               bool a_trans, const std::vector<double>& b, bool b_trans) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a_trans ? a[p * m + i] : a[i * k + p];
        const double bv = b_trans ? b[j * k + p] : b[p * n + j];
        c[i * n + j] += av * bv;
      }
  return c;
}

void expect_close(const std::vector<double>& got, const std::vector<double>& want, double rel) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], rel * (1.0 + std::abs(want[i]))) << "at " << i;
  }
}

void check_table(const KernelTable& kt, double rel) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> dim(1, 37);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = dim(rng), n = dim(rng), k = dim(rng);
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    const auto c0 = random_vec(m * n, rng);

    auto c = c0;
    kt.gemm_nn(m, n, k, a.data(), b.data(), c.data());
    auto want = naive_gemm(m, n, k, a, false, b, false);
    for (std::size_t i = 0; i < want.size(); ++i) want[i] += c0[i];
    expect_close(c, want, rel);

    const auto bt = random_vec(n * k, rng);
    c = c0;
    kt.gemm_nt(m, n, k, a.data(), bt.data(), c.data());
    want = naive_gemm(m, n, k, a, false, bt, true);
    for (std::size_t i = 0; i < want.size(); ++i) want[i] += c0[i];
    expect_close(c, want, rel);

    const auto at = random_vec(k * m, rng);
    c = c0;
    kt.gemm_tn(m, n, k, at.data(), b.data(), c.data());
    want = naive_gemm(m, n, k, at, true, b, false);
    for (std::size_t i = 0; i < want.size(); ++i) want[i] += c0[i];
    expect_close(c, want, rel);
  }
}

TEST(ScalarKernels, MatchNaiveGemm) { check_table(nrg::simd::scalar_kernels(), 1e-13); }

TEST(ScalarKernels, VectorOps) {
  const auto& kt = nrg::simd::scalar_kernels();
  std::vector<double> a{1, 2, 3}, b{4, 5, 6}, out(3);
  EXPECT_DOUBLE_EQ(kt.dot(3, a.data(), b.data()), 32.0);
  kt.axpy(3, 2.0, a.data(), b.data());
  EXPECT_EQ(b, (std::vector<double>{6, 9, 12}));
  kt.mul(3, a.data(), a.data(), out.data());
  EXPECT_EQ(out, (std::vector<double>{1, 4, 9}));
}

TEST(Avx2Kernels, MatchNaiveGemm) {
  const KernelTable* fast = nrg::simd::avx2_kernels();
  if (!fast) GTEST_SKIP() << "AVX2 variant unavailable";
  check_table(*fast, 1e-13);
}

// The vectorized variant must agree with the scalar reference on every
// kernel across lengths that exercise the unrolled body and the tails.
TEST(Avx2Kernels, EquivalentToScalar) {
  const KernelTable* fast = nrg::simd::avx2_kernels();
  if (!fast) GTEST_SKIP() << "AVX2 variant unavailable";
  const KernelTable& ref = nrg::simd::scalar_kernels();
  std::mt19937_64 rng(11);
  for (std::size_t n = 0; n < 70; ++n) {
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);
    const double d_ref = ref.dot(n, a.data(), b.data());
    const double d_fast = fast->dot(n, a.data(), b.data());
    EXPECT_NEAR(d_fast, d_ref, 1e-13 * (1.0 + std::abs(d_ref)));

    auto y_ref = b, y_fast = b;
    ref.axpy(n, -0.75, a.data(), y_ref.data());
    fast->axpy(n, -0.75, a.data(), y_fast.data());
    expect_close(y_fast, y_ref, 1e-15);

    std::vector<double> m_ref(n), m_fast(n);
    ref.mul(n, a.data(), b.data(), m_ref.data());
    fast->mul(n, a.data(), b.data(), m_fast.data());
    EXPECT_EQ(m_fast, m_ref);  // single rounding either way
  }
}

TEST(Dispatch, SelectScalarAndBack) {
  const std::string_view before = nrg::simd::active().name;
  ASSERT_TRUE(nrg::simd::select(nrg::simd::Variant::kScalar));
  EXPECT_EQ(nrg::simd::active().name, "scalar");
  if (nrg::simd::avx2_kernels()) {
    ASSERT_TRUE(nrg::simd::select(nrg::simd::Variant::kAvx2));
    EXPECT_EQ(nrg::simd::active().name, "avx2");
  } else {
    EXPECT_FALSE(nrg::simd::select(nrg::simd::Variant::kAvx2));
  }
  nrg::simd::select(before == "avx2" ? nrg::simd::Variant::kAvx2 : nrg::simd::Variant::kScalar);
}

}  // namespace
