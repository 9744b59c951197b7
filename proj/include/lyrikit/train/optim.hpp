// Copyright 2026 lyrikit authors
// Noam learning-rate schedule and Adam with a trainability contract.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <map>
#include <string>

#include "lyrikit/numeric/params.hpp"

namespace lyrikit::train {

// k * d^(-1/2) * min(step^(-1/2), step * warmup^(-3/2)); step >= 1.
double noam_lr(int64_t step, int d_model, int64_t warmup, double k);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Bias-corrected update of trainable parameters in place. The gradient map
  // must cover exactly the trainable set; a nonzero gradient for a frozen
  // parameter is a freezing violation.
  void step(numeric::ParamStore& params, const numeric::GradMap& grads, double lr);

  int64_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  // Binary state file ("lyo1") with the step counter and both moments, for
  // exact resumption.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  AdamConfig cfg_;
  int64_t step_ = 0;
  std::map<std::string, numeric::Tensor> m_;
  std::map<std::string, numeric::Tensor> v_;
};

// Scales gradients in place so the global L2 norm does not exceed max_norm.
// Returns the pre-clip norm. max_norm <= 0 disables clipping.
double clip_global_norm(numeric::GradMap& grads, double max_norm);

}  // namespace lyrikit::train
