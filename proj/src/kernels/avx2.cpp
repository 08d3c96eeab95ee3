#include "dsae/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define DSAE_HAVE_AVX2_VARIANT 1
#include <immintrin.h>
#endif

namespace dsae::kernels {

#if DSAE_HAVE_AVX2_VARIANT

#define DSAE_AVX2 __attribute__((target("avx2,fma")))

namespace {

DSAE_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

DSAE_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double res = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) res += a[i] * b[i];
  return res;
}

DSAE_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four dot products sharing the loads of one A row.
DSAE_AVX2 void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                            const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + j * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      __m256d s0 = _mm256_setzero_pd();
      __m256d s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd();
      __m256d s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d va = _mm256_loadu_pd(ai + p);
        s0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + p), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        r0 += ai[p] * b0[p];
        r1 += ai[p] * b1[p];
        r2 += ai[p] * b2[p];
        r3 += ai[p] * b3[p];
      }
      ci[j] = r0;
      ci[j + 1] = r1;
      ci[j + 2] = r2;
      ci[j + 3] = r3;
    }
    for (; j < n; ++j) ci[j] = dot_avx2(ai, b + j * k, k);
  }
}

// Row update c_i += sum_p coef[p] * B_p for four rows of B at a time.
DSAE_AVX2 inline void accumulate_rows(const double* coef, std::size_t coef_stride, std::size_t k,
                                      const double* b, std::size_t n, double* ci) {
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const __m256d c0 = _mm256_set1_pd(coef[p * coef_stride]);
    const __m256d c1 = _mm256_set1_pd(coef[(p + 1) * coef_stride]);
    const __m256d c2 = _mm256_set1_pd(coef[(p + 2) * coef_stride]);
    const __m256d c3 = _mm256_set1_pd(coef[(p + 3) * coef_stride]);
    const double* b0 = b + p * n;
    const double* b1 = b0 + n;
    const double* b2 = b1 + n;
    const double* b3 = b2 + n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_loadu_pd(ci + j);
      acc = _mm256_fmadd_pd(c0, _mm256_loadu_pd(b0 + j), acc);
      acc = _mm256_fmadd_pd(c1, _mm256_loadu_pd(b1 + j), acc);
      acc = _mm256_fmadd_pd(c2, _mm256_loadu_pd(b2 + j), acc);
      acc = _mm256_fmadd_pd(c3, _mm256_loadu_pd(b3 + j), acc);
      _mm256_storeu_pd(ci + j, acc);
    }
    for (; j < n; ++j) {
      ci[j] += coef[p * coef_stride] * b0[j] + coef[(p + 1) * coef_stride] * b1[j] +
               coef[(p + 2) * coef_stride] * b2[j] + coef[(p + 3) * coef_stride] * b3[j];
    }
  }
  for (; p < k; ++p) axpy_avx2(coef[p * coef_stride], b + p * n, ci, n);
}

DSAE_AVX2 void gemm_nn_acc_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                                const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) accumulate_rows(a + i * k, 1, k, b, n, c + i * n);
}

DSAE_AVX2 void gemm_tn_acc_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                                const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) accumulate_rows(a + i, m, k, b, n, c + i * n);
}

}  // namespace

bool cpu_has_avx2() noexcept {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const KernelTable* avx2_table() noexcept {
  static const KernelTable table{Isa::Avx2,        dot_avx2,        axpy_avx2, gemm_nt_avx2,
                                 gemm_nn_acc_avx2, gemm_tn_acc_avx2};
  return &table;
}

#else

bool cpu_has_avx2() noexcept { return false; }
const KernelTable* avx2_table() noexcept { return nullptr; }

#endif

}  // namespace dsae::kernels
