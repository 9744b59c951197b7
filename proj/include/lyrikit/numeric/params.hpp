// Copyright 2026 lyrikit authors
// Named parameter store with a trainability mask, plus per-forward binding
// of parameters onto a tape.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "lyrikit/numeric/tape.hpp"

namespace lyrikit::numeric {

struct Parameter {
  std::string name;  // hierarchical path, e.g. "encoder.block3.adapter.pop.down.weight"
  Tensor value;
  bool trainable = true;
};

class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor value, bool trainable = true);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  // Registration order, stable across runs.
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  size_t size() const { return params_.size(); }

  int64_t total_elements(bool trainable_only = false) const;
  size_t trainable_count() const;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, size_t> index_;
};

// Parameters bound onto one tape for one forward/backward pass. Trainable
// parameters become differentiable leaves, frozen ones plain constants.
class BoundParams {
 public:
  static BoundParams bind(Tape& tape, ParamStore& store, bool with_grad);

  const Var& operator[](const std::string& name) const;
  uint64_t tape_id() const { return tape_id_; }
  const std::map<std::string, Var>& vars() const { return vars_; }

 private:
  std::map<std::string, Var> vars_;
  uint64_t tape_id_ = 0;
};

using GradMap = std::map<std::string, Tensor>;

// Runs the backward sweep and collects d(loss)/d(p) for every trainable
// bound parameter. Parameters the loss never touched get zero gradients.
// Fails if the loss was not recorded on the same tape as the binding.
GradMap compute_gradients(Tape& tape, const Var& loss, const BoundParams& bound);

}  // namespace lyrikit::numeric
