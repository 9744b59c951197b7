// Copyright 2026 lyrikit authors
// Dense row-major tensor. Values are immutable by convention once an op has
// produced them; gradient buffers are the only thing mutated in place.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lyrikit/common.hpp"

namespace lyrikit::numeric {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    for (int64_t d : shape_)
      if (d <= 0) fail("tensor dims must be positive, got " + shape_str(shape_));
    data_.assign(static_cast<size_t>(shape_numel(shape_)), real(0));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, real v) {
    Tensor t(std::move(shape));
    for (real& x : t.data_) x = v;
    return t;
  }

  static Tensor scalar(real v) { return full({1}, v); }

  static Tensor from(Shape shape, std::vector<real> data) {
    Tensor t;
    t.shape_ = std::move(shape);
    if (static_cast<int64_t>(data.size()) != shape_numel(t.shape_))
      fail("tensor data length " + std::to_string(data.size()) + " does not match shape " +
           shape_str(t.shape_));
    t.data_ = std::move(data);
    return t;
  }

  static Tensor randn(Shape shape, Rng& rng, real stddev = 1) {
    Tensor t(std::move(shape));
    for (real& x : t.data_) x = static_cast<real>(rng.normal()) * stddev;
    return t;
  }

  static Tensor rand_uniform(Shape shape, Rng& rng, real lo, real hi) {
    Tensor t(std::move(shape));
    for (real& x : t.data_) x = static_cast<real>(rng.uniform(lo, hi));
    return t;
  }

  const Shape& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }

  real& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  real operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  real& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  real at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  real& at(int64_t i, int64_t j, int64_t k) {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  real at(int64_t i, int64_t j, int64_t k) const {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (real x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  Shape shape_;
  std::vector<real> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
}

}  // namespace lyrikit::numeric
