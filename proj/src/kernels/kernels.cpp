// Copyright 2026 lyrikit authors
// Runtime backend selection.
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/kernels/kernels.hpp"

#include <cstdlib>

namespace lyrikit::kernels {

const Backend* avx2_backend_if_supported();
const Backend* neon_backend_if_supported();

namespace {

const Backend* g_active = nullptr;

const Backend* pick_default() {
  if (const char* env = std::getenv("LYRIKIT_KERNELS")) {
    if (const Backend* b = backend_by_name(env)) return b;
    fail(std::string("LYRIKIT_KERNELS requests unavailable backend: ") + env);
  }
  if (const Backend* b = avx2_backend_if_supported()) return b;
  if (const Backend* b = neon_backend_if_supported()) return b;
  return &scalar_backend();
}

}  // namespace

const Backend* backend_by_name(const std::string& name) {
  if (name == "scalar") return &scalar_backend();
  if (name == "avx2") return avx2_backend_if_supported();
  if (name == "neon") return neon_backend_if_supported();
  return nullptr;
}

const Backend& active() {
  if (!g_active) g_active = pick_default();
  return *g_active;
}

void set_backend(const std::string& name) {
  const Backend* b = backend_by_name(name);
  if (!b) fail("kernel backend unavailable: " + name);
  g_active = b;
}

}  // namespace lyrikit::kernels
