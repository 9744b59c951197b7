// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/train/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "lyrikit/kernels/kernels.hpp"

namespace lyrikit::train {

double noam_lr(int64_t step, int d_model, int64_t warmup, double k) {
  if (step < 1) fail("noam schedule is defined for step >= 1");
  if (warmup < 1) fail("warmup must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return k * std::pow(static_cast<double>(d_model), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

void Adam::step(numeric::ParamStore& params, const numeric::GradMap& grads, double lr) {
  // The gradient map must cover exactly the trainable set.
  size_t trainable = 0;
  for (const numeric::Parameter& p : params.all())
    if (p.trainable) {
      ++trainable;
      if (!grads.count(p.name)) fail("missing gradient for trainable parameter " + p.name);
    }
  for (const auto& [name, grad] : grads) {
    const numeric::Parameter& p = params.get(name);
    if (!p.trainable) {
      for (int64_t i = 0; i < grad.numel(); ++i)
        if (grad[i] != 0)
          fail("freezing violation: nonzero gradient for frozen parameter " + name);
    }
  }
  if (grads.size() < trainable) fail("gradient map does not cover the trainable set");

  ++step_;
  const real bc1 = static_cast<real>(1 - std::pow(cfg_.beta1, static_cast<double>(step_)));
  const real bc2 = static_cast<real>(1 - std::pow(cfg_.beta2, static_cast<double>(step_)));
  const auto& kern = kernels::active();
  for (numeric::Parameter& p : params.all()) {
    if (!p.trainable) continue;
    const numeric::Tensor& g = grads.at(p.name);
    numeric::check_same_shape(p.value, g, "adam");
    auto mit = m_.find(p.name);
    if (mit == m_.end()) {
      mit = m_.emplace(p.name, numeric::Tensor::zeros(p.value.shape())).first;
      v_.emplace(p.name, numeric::Tensor::zeros(p.value.shape()));
    }
    numeric::Tensor& m = mit->second;
    numeric::Tensor& v = v_.at(p.name);
    kern.adam_update(p.value.data(), m.data(), v.data(), g.data(),
                     static_cast<size_t>(p.value.numel()), static_cast<real>(lr),
                     static_cast<real>(cfg_.beta1), static_cast<real>(cfg_.beta2),
                     static_cast<real>(cfg_.eps), bc1, bc2);
  }
}

namespace {

void put_u64(std::ostream& out, uint64_t x) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  out.write(b, 8);
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(b[i]) << (8 * i);
  return x;
}

void put_tensor(std::ostream& out, const numeric::Tensor& t) {
  put_u64(out, t.rank());
  for (int64_t d : t.shape()) put_u64(out, static_cast<uint64_t>(d));
  for (int64_t i = 0; i < t.numel(); ++i) {
    const double v = static_cast<double>(t[i]);
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
  }
}

numeric::Tensor get_tensor(std::istream& in) {
  const uint64_t rank = get_u64(in);
  numeric::Shape shape;
  int64_t numel = 1;
  for (uint64_t i = 0; i < rank; ++i) {
    shape.push_back(static_cast<int64_t>(get_u64(in)));
    numel *= shape.back();
  }
  std::vector<real> data(static_cast<size_t>(numel));
  for (int64_t i = 0; i < numel; ++i) {
    const uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    data[static_cast<size_t>(i)] = static_cast<real>(v);
  }
  return numeric::Tensor::from(std::move(shape), std::move(data));
}

}  // namespace

void Adam::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write optimizer state: " + path);
  out.write("lyo1", 4);
  put_u64(out, static_cast<uint64_t>(step_));
  put_u64(out, m_.size());
  for (const auto& [name, m] : m_) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_tensor(out, m);
    put_tensor(out, v_.at(name));
  }
  if (!out) fail("failed writing optimizer state: " + path);
}

void Adam::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read optimizer state: " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, "lyo1", 4) != 0) fail("not an optimizer state file: " + path);
  step_ = static_cast<int64_t>(get_u64(in));
  const uint64_t n = get_u64(in);
  m_.clear();
  v_.clear();
  for (uint64_t i = 0; i < n; ++i) {
    const uint64_t len = get_u64(in);
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    m_[name] = get_tensor(in);
    v_[name] = get_tensor(in);
  }
  if (!in) fail("truncated optimizer state: " + path);
}

double clip_global_norm(numeric::GradMap& grads, double max_norm) {
  double sq = 0;
  for (const auto& [name, g] : grads)
    for (int64_t i = 0; i < g.numel(); ++i)
      sq += static_cast<double>(g[i]) * static_cast<double>(g[i]);
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const real scale = static_cast<real>(max_norm / norm);
    for (auto& [name, g] : grads)
      kernels::active().scale(scale, g.data(), static_cast<size_t>(g.numel()));
  }
  return norm;
}

}  // namespace lyrikit::train
