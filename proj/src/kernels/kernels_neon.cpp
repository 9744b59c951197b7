// Copyright 2026 lyrikit authors
// AArch64 NEON kernels, 2 doubles per vector.
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/kernels/kernels.hpp"

#if defined(__aarch64__) && !defined(LYRIKIT_REAL32)

#include <arm_neon.h>

#include <cmath>

namespace lyrikit::kernels {

namespace {

double dot_neon(const double* a, const double* b, size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, size_t n) {
  float64x2_t av = vdupq_n_f64(alpha);
  size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), av, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_neon(const double* a, const double* b, double* out, size_t n) {
  size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_neon(const double* a, const double* b, double* out, size_t n) {
  size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_neon(double alpha, double* x, size_t n) {
  float64x2_t av = vdupq_n_f64(alpha);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(av, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

double sum_neon(const double* x, size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double max_neon(const double* x, size_t n) {
  double m = x[0];
  size_t i = 0;
  if (n >= 2) {
    float64x2_t mv = vld1q_f64(x);
    for (i = 2; i + 2 <= n; i += 2) mv = vmaxq_f64(mv, vld1q_f64(x + i));
    m = vmaxvq_f64(mv);
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

void relu_neon(const double* x, double* out, size_t n) {
  float64x2_t zero = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmaxq_f64(zero, vld1q_f64(x + i)));
  for (; i < n; ++i) out[i] = x[i] > 0 ? x[i] : 0;
}

void relu_grad_neon(const double* x, const double* g, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (x[i] > 0) out[i] += g[i];
}

void adam_neon(double* p, double* m, double* v, const double* g, size_t n, double lr,
               double beta1, double beta2, double eps, double bc1, double bc2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

void matmul_nn_neon(const double* a, const double* b, double* c, size_t m, size_t k,
                    size_t n) {
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) axpy_neon(a[i * k + p], b + p * n, c + i * n, n);
}

void matmul_nt_neon(const double* a, const double* b, double* c, size_t m, size_t k,
                    size_t n) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) c[i * n + j] += dot_neon(a + i * k, b + j * k, k);
}

void matmul_tn_neon(const double* a, const double* b, double* c, size_t m, size_t k,
                    size_t n) {
  for (size_t p = 0; p < k; ++p)
    for (size_t i = 0; i < m; ++i) axpy_neon(a[p * m + i], b + p * n, c + i * n, n);
}

}  // namespace

const Backend* neon_backend_if_supported() {
  static const Backend b = {
      "neon",      dot_neon,  axpy_neon, add_neon,       mul_neon,
      scale_neon,  sum_neon,  max_neon,  relu_neon,      relu_grad_neon,
      adam_neon,   matmul_nn_neon, matmul_nt_neon, matmul_tn_neon,
  };
  return &b;
}

}  // namespace lyrikit::kernels

#else

namespace lyrikit::kernels {
const Backend* neon_backend_if_supported() { return nullptr; }
}  // namespace lyrikit::kernels

#endif
