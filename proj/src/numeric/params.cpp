// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/numeric/params.hpp"

namespace lyrikit::numeric {

Parameter& ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (index_.count(name)) fail("duplicate parameter name: " + name);
  index_[name] = params_.size();
  params_.push_back(Parameter{name, std::move(value), trainable});
  return params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail("unknown parameter: " + name);
  return params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail("unknown parameter: " + name);
  return params_[it->second];
}

int64_t ParamStore::total_elements(bool trainable_only) const {
  int64_t n = 0;
  for (const Parameter& p : params_)
    if (!trainable_only || p.trainable) n += p.value.numel();
  return n;
}

size_t ParamStore::trainable_count() const {
  size_t n = 0;
  for (const Parameter& p : params_)
    if (p.trainable) ++n;
  return n;
}

BoundParams BoundParams::bind(Tape& tape, ParamStore& store, bool with_grad) {
  BoundParams b;
  b.tape_id_ = tape.id();
  for (Parameter& p : store.all())
    b.vars_[p.name] = tape.leaf(p.value, with_grad && p.trainable);
  return b;
}

const Var& BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) fail("parameter not bound: " + name);
  return it->second;
}

GradMap compute_gradients(Tape& tape, const Var& loss, const BoundParams& bound) {
  if (!loss || loss->tape_id != tape.id() || bound.tape_id() != tape.id())
    fail("compute_gradients: loss was not produced by a recorded forward pass on this tape");
  tape.backward(loss);
  GradMap grads;
  for (const auto& [name, var] : bound.vars()) {
    if (!var->requires_grad) continue;
    grads[name] = var->grad.empty() ? Tensor::zeros(var->value.shape()) : var->grad;
  }
  return grads;
}

}  // namespace lyrikit::numeric
