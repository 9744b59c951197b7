// Copyright 2026 lyrikit authors
// Reverse-mode differentiation over a recorded computation tape. Only scalar
// losses are differentiated; nodes are created in topological order and the
// backward sweep walks the tape in reverse.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lyrikit/numeric/tensor.hpp"

namespace lyrikit::numeric {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // empty until a child pushes gradient into it
  bool requires_grad = false;
  int64_t id = -1;
  uint64_t tape_id = 0;
  std::vector<Var> parents;
  std::function<void(Node&)> backward;

  Tensor& ensure_grad() {
    if (grad.empty()) grad = Tensor::zeros(value.shape());
    return grad;
  }
};

class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor v, bool requires_grad = false);
  Var constant(Tensor v) { return leaf(std::move(v), false); }

  // Custom op hook for modules that compute their own gradients (CTC etc.).
  Var custom(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw);

  // Elementwise.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, real c);
  Var relu(Var x);
  Var dropout(Var x, real p, Rng& rng);

  // x[..,d] + b[d], broadcast over leading dims.
  Var add_bias(Var x, Var b);
  // x[B,S,d] + rows[S,d] with rows a non-learned constant (positional code).
  Var add_rows(Var x, Tensor rows);
  // x[B*heads,Sq,Sk] + mask[B,Sq,Sk], mask constant, broadcast across heads.
  Var add_mask(Var x, Tensor mask, int heads);

  // a[..,k] x w[k,n]; leading dims of a are batch.
  Var matmul(Var a, Var w);
  Var linear(Var x, Var w, Var b);
  // [B,m,k] x [B,k,n]
  Var bmm(Var a, Var b);
  // [B,m,k] x [B,n,k]^T
  Var bmm_nt(Var a, Var b);

  // Shape movement (pure permutations, exact inverses in backward).
  Var reshape(Var x, Shape shape);
  Var split_heads(Var x, int heads);              // [B,S,d] -> [B*h,S,d/h]
  Var merge_heads(Var x, int heads);              // [B*h,S,dh] -> [B,S,dh*h]
  Var channels_to_features(Var x);                // [B,C,T,F] -> [B,T,C*F]

  Var softmax(Var x, int axis = -1);
  Var log_softmax(Var x);  // last axis
  Var layer_norm(Var x, Var gain, Var bias, real eps = real(1e-12));

  Var embedding(Var table, const std::vector<std::vector<int>>& ids);
  // x[B,C,T,F] conv w[O,C,3,3] stride 2, valid padding.
  Var conv2d_s2(Var x, Var w, Var b);

  Var sum(Var x);
  Var mean(Var x);
  Var add_scaled(Var a, real ca, Var b, real cb);

  void backward(const Var& loss);

  uint64_t id() const { return tape_id_; }
  size_t size() const { return nodes_.size(); }

 private:
  Var make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw);
  void check_mine(const Var& v, const char* op) const;

  std::vector<Var> nodes_;
  uint64_t tape_id_;
};

// Accumulate src into dst (dst += src), shapes must match.
void accumulate(Tensor& dst, const Tensor& src);

}  // namespace lyrikit::numeric
