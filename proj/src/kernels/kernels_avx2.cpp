// Copyright 2026 lyrikit authors
// AVX2+FMA kernels, 4 doubles per vector. Function-level target attributes
// keep the rest of this translation unit baseline-ISA; callers must check
// CPU support before dispatching here.
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/kernels/kernels.hpp"

#if defined(__x86_64__) && !defined(LYRIKIT_REAL32)

#include <immintrin.h>

#include <cmath>

#define LYK_AVX2 __attribute__((target("avx2,fma")))

namespace lyrikit::kernels {

namespace {

LYK_AVX2 inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

LYK_AVX2 double dot_avx2(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum4(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

LYK_AVX2 void axpy_avx2(double alpha, const double* x, double* y, size_t n) {
  __m256d av = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

LYK_AVX2 void add_avx2(const double* a, const double* b, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

LYK_AVX2 void mul_avx2(const double* a, const double* b, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

LYK_AVX2 void scale_avx2(double alpha, double* x, size_t n) {
  __m256d av = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

LYK_AVX2 double sum_avx2(const double* x, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum4(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

LYK_AVX2 double max_avx2(const double* x, size_t n) {
  double m = x[0];
  size_t i = 0;
  if (n >= 4) {
    __m256d mv = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, mv);
    m = lanes[0];
    for (int l = 1; l < 4; ++l)
      if (lanes[l] > m) m = lanes[l];
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

LYK_AVX2 void relu_avx2(const double* x, double* out, size_t n) {
  __m256d zero = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = x[i] > 0 ? x[i] : 0;
}

LYK_AVX2 void relu_grad_avx2(const double* x, const double* g, double* out, size_t n) {
  __m256d zero = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d gv = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), gv));
  }
  for (; i < n; ++i)
    if (x[i] > 0) out[i] += g[i];
}

LYK_AVX2 void adam_avx2(double* p, double* m, double* v, const double* g, size_t n,
                        double lr, double beta1, double beta2, double eps, double bc1,
                        double bc2) {
  __m256d b1 = _mm256_set1_pd(beta1), c1 = _mm256_set1_pd(1 - beta1);
  __m256d b2 = _mm256_set1_pd(beta2), c2 = _mm256_set1_pd(1 - beta2);
  __m256d lrv = _mm256_set1_pd(lr), epsv = _mm256_set1_pd(eps);
  __m256d rbc1 = _mm256_set1_pd(1.0 / bc1), rbc2 = _mm256_set1_pd(1.0 / bc2);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(c1, gv));
    __m256d vv = _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i),
                                 _mm256_mul_pd(c2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    __m256d mhat = _mm256_mul_pd(mv, rbc1);
    __m256d vhat = _mm256_mul_pd(vv, rbc2);
    __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    __m256d upd = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

LYK_AVX2 void matmul_nn_avx2(const double* a, const double* b, double* c, size_t m,
                             size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (size_t p = 0; p < k; ++p) axpy_avx2(arow[p], b + p * n, crow, n);
  }
}

LYK_AVX2 void matmul_nt_avx2(const double* a, const double* b, double* c, size_t m,
                             size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) crow[j] += dot_avx2(arow, b + j * k, k);
  }
}

LYK_AVX2 void matmul_tn_avx2(const double* a, const double* b, double* c, size_t m,
                             size_t k, size_t n) {
  for (size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (size_t i = 0; i < m; ++i) axpy_avx2(arow[i], brow, c + i * n, n);
  }
}

}  // namespace

const Backend* avx2_backend_if_supported() {
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
  static const Backend b = {
      "avx2",      dot_avx2,  axpy_avx2, add_avx2,       mul_avx2,
      scale_avx2,  sum_avx2,  max_avx2,  relu_avx2,      relu_grad_avx2,
      adam_avx2,   matmul_nn_avx2, matmul_nt_avx2, matmul_tn_avx2,
  };
  return &b;
}

}  // namespace lyrikit::kernels

#else

namespace lyrikit::kernels {
const Backend* avx2_backend_if_supported() { return nullptr; }
}  // namespace lyrikit::kernels

#endif
