// Copyright 2026 lyrikit authors
// Shared scalar type, deterministic RNG and small utilities.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lyrikit {

#ifdef LYRIKIT_REAL32
using real = float;
#else
using real = double;
#endif

// Deterministic RNG. All distributions are derived from raw mt19937_64
// draws with fixed arithmetic, so a seed produces the same stream on any
// platform (std::uniform_*_distribution makes no such guarantee).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53 bits of entropy.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Inclusive bounds.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(gen_() % span);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

[[noreturn]] inline void usage_fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace lyrikit
