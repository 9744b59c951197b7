// Copyright 2026 lyrikit authors
// Data-parallel inner-loop kernels: scalar reference plus SIMD variants
// selected at runtime. Every variant computes the same contract as the
// scalar reference; equivalence is covered by tests/test_kernels.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <string>

#include "lyrikit/common.hpp"

namespace lyrikit::kernels {

// All matmul kernels accumulate into C (callers zero-fill first when needed).
// Shapes are row-major:
//   matmul_nn: C[M,N] += A[M,K] * B[K,N]
//   matmul_nt: C[M,N] += A[M,K] * B[N,K]^T
//   matmul_tn: C[M,N] += A[K,M]^T * B[K,N]
struct Backend {
  const char* name;

  real (*dot)(const real* a, const real* b, size_t n);
  void (*axpy)(real alpha, const real* x, real* y, size_t n);  // y += alpha*x
  void (*add)(const real* a, const real* b, real* out, size_t n);
  void (*mul)(const real* a, const real* b, real* out, size_t n);
  void (*scale)(real alpha, real* x, size_t n);  // x *= alpha
  real (*sum)(const real* x, size_t n);
  real (*max)(const real* x, size_t n);  // n >= 1
  void (*relu)(const real* x, real* out, size_t n);
  // out += g where x > 0
  void (*relu_grad)(const real* x, const real* g, real* out, size_t n);
  // Bias-corrected Adam step over one parameter buffer. bc1 = 1-beta1^t,
  // bc2 = 1-beta2^t are precomputed by the caller.
  void (*adam_update)(real* p, real* m, real* v, const real* g, size_t n, real lr,
                      real beta1, real beta2, real eps, real bc1, real bc2);
  void (*matmul_nn)(const real* a, const real* b, real* c, size_t m, size_t k, size_t n);
  void (*matmul_nt)(const real* a, const real* b, real* c, size_t m, size_t k, size_t n);
  void (*matmul_tn)(const real* a, const real* b, real* c, size_t m, size_t k, size_t n);
};

// The active backend. Chosen once at first use: the widest SIMD variant the
// CPU supports, unless overridden by set_backend() or the LYRIKIT_KERNELS
// environment variable (values: scalar, avx2, neon).
const Backend& active();

// Force a backend by name. Throws if the backend is unavailable on this CPU.
void set_backend(const std::string& name);

// Lookup without activation; nullptr if not compiled in / not supported.
const Backend* backend_by_name(const std::string& name);

const Backend& scalar_backend();

}  // namespace lyrikit::kernels
