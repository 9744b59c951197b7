// Copyright 2026 lyrikit authors
// Scalar reference kernels. The behavioural contract for every SIMD variant.
//
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <cstddef>

#include "lyrikit/kernels/kernels.hpp"

namespace lyrikit::kernels {

namespace {

real dot_scalar(const real* a, const real* b, size_t n) {
  real acc = 0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(real alpha, const real* x, real* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(const real* a, const real* b, real* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_scalar(const real* a, const real* b, real* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(real alpha, real* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

real sum_scalar(const real* x, size_t n) {
  real acc = 0;
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

real max_scalar(const real* x, size_t n) {
  real m = x[0];
  for (size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

void relu_scalar(const real* x, real* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0 ? x[i] : 0;
}

void relu_grad_scalar(const real* x, const real* g, real* out, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (x[i] > 0) out[i] += g[i];
}

void adam_scalar(real* p, real* m, real* v, const real* g, size_t n, real lr, real beta1,
                 real beta2, real eps, real bc1, real bc2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
    real mhat = m[i] / bc1;
    real vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void matmul_nn_scalar(const real* a, const real* b, real* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    real* crow = c + i * n;
    const real* arow = a + i * k;
    for (size_t p = 0; p < k; ++p) axpy_scalar(arow[p], b + p * n, crow, n);
  }
}

void matmul_nt_scalar(const real* a, const real* b, real* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const real* arow = a + i * k;
    real* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) crow[j] += dot_scalar(arow, b + j * k, k);
  }
}

void matmul_tn_scalar(const real* a, const real* b, real* c, size_t m, size_t k, size_t n) {
  for (size_t p = 0; p < k; ++p) {
    const real* arow = a + p * m;
    const real* brow = b + p * n;
    for (size_t i = 0; i < m; ++i) axpy_scalar(arow[i], brow, c + i * n, n);
  }
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend b = {
      "scalar",        dot_scalar,  axpy_scalar, add_scalar,       mul_scalar,
      scale_scalar,    sum_scalar,  max_scalar,  relu_scalar,      relu_grad_scalar,
      adam_scalar,     matmul_nn_scalar, matmul_nt_scalar, matmul_tn_scalar,
  };
  return b;
}

}  // namespace lyrikit::kernels
