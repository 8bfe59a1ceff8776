#include "p3c/simd.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define P3C_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#endif

#include <cmath>
#include <limits>

namespace p3c::simd {

#ifdef P3C_HAVE_AVX2_BUILD
namespace {

#define P3C_AVX2 __attribute__((target("avx2,fma")))

P3C_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

P3C_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

P3C_AVX2 void mvn_argmax_avx2(const double* factor, bool lower, const double* mu, std::size_t m,
                              const double* z, std::size_t draws, std::int32_t* winners) {
  std::size_t d = 0;
  const __m256d neg_inf = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  for (; d + 4 <= draws; d += 4) {
    __m256d best = neg_inf;
    __m256d idx = _mm256_set1_pd(-1.0);
    __m256d tie = _mm256_setzero_pd();
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t kend = lower ? i + 1 : m;
      const double* row = factor + i * m;
      __m256d acc = _mm256_set1_pd(mu[i]);
      for (std::size_t k = 0; k < kend; ++k) {
        acc = _mm256_fmadd_pd(_mm256_set1_pd(row[k]), _mm256_loadu_pd(z + k * draws + d), acc);
      }
      const __m256d gt = _mm256_cmp_pd(acc, best, _CMP_GT_OQ);
      const __m256d eq = _mm256_cmp_pd(acc, best, _CMP_EQ_OQ);
      best = _mm256_blendv_pd(best, acc, gt);
      idx = _mm256_blendv_pd(idx, _mm256_set1_pd(static_cast<double>(i)), gt);
      tie = _mm256_andnot_pd(gt, _mm256_or_pd(tie, eq));
    }
    const __m256d out = _mm256_blendv_pd(idx, _mm256_set1_pd(-1.0), tie);
    const __m128i ints = _mm256_cvttpd_epi32(out);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(winners + d), ints);
  }
  if (d < draws) {
    // Tail columns, same operation order as the scalar reference.
    for (; d < draws; ++d) {
      double best = -std::numeric_limits<double>::infinity();
      std::int32_t id = -1;
      bool t = false;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t kend = lower ? i + 1 : m;
        const double* row = factor + i * m;
        double acc = mu[i];
        for (std::size_t k = 0; k < kend; ++k) acc = std::fma(row[k], z[k * draws + d], acc);
        if (acc > best) {
          best = acc;
          id = static_cast<std::int32_t>(i);
          t = false;
        } else if (acc == best) {
          t = true;
        }
      }
      winners[d] = t ? -1 : id;
    }
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const KernelTable table{Isa::avx2, dot_avx2, axpy_avx2, mvn_argmax_avx2};
  return ok ? &table : nullptr;
}

#else

const KernelTable* avx2_kernels() { return nullptr; }

#endif

}  // namespace p3c::simd
