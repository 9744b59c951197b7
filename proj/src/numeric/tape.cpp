// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/numeric/tape.hpp"

#include <atomic>
#include <cmath>

#include "lyrikit/kernels/kernels.hpp"

namespace lyrikit::numeric {

namespace {
std::atomic<uint64_t> g_tape_counter{1};

const kernels::Backend& K() { return kernels::active(); }
}  // namespace

void accumulate(Tensor& dst, const Tensor& src) {
  check_same_shape(dst, src, "accumulate");
  K().axpy(1, src.data(), dst.data(), static_cast<size_t>(dst.numel()));
}

Tape::Tape() : tape_id_(g_tape_counter.fetch_add(1)) {}

void Tape::check_mine(const Var& v, const char* op) const {
  if (!v) fail(std::string(op) + ": null operand");
  if (v->tape_id != tape_id_) fail(std::string(op) + ": operand belongs to a different tape");
}

Var Tape::make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->backward = std::move(bw);
  n->tape_id = tape_id_;
  n->id = static_cast<int64_t>(nodes_.size());
  for (const Var& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  nodes_.push_back(n);
  return n;
}

Var Tape::leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  n->tape_id = tape_id_;
  n->id = static_cast<int64_t>(nodes_.size());
  nodes_.push_back(n);
  return n;
}

Var Tape::custom(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw) {
  for (const Var& p : parents) check_mine(p, "custom");
  return make(std::move(value), std::move(parents), std::move(bw));
}

Var Tape::add(Var a, Var b) {
  check_mine(a, "add");
  check_mine(b, "add");
  check_same_shape(a->value, b->value, "add");
  Tensor out(a->value.shape());
  K().add(a->value.data(), b->value.data(), out.data(), static_cast<size_t>(out.numel()));
  return make(std::move(out), {a, b}, [](Node& n) {
    if (n.parents[0]->requires_grad) accumulate(n.parents[0]->ensure_grad(), n.grad);
    if (n.parents[1]->requires_grad) accumulate(n.parents[1]->ensure_grad(), n.grad);
  });
}

Var Tape::sub(Var a, Var b) {
  check_mine(a, "sub");
  check_mine(b, "sub");
  check_same_shape(a->value, b->value, "sub");
  Tensor out(a->value.shape());
  const size_t n = static_cast<size_t>(out.numel());
  for (size_t i = 0; i < n; ++i) out.data()[i] = a->value.data()[i] - b->value.data()[i];
  return make(std::move(out), {a, b}, [](Node& nd) {
    if (nd.parents[0]->requires_grad) accumulate(nd.parents[0]->ensure_grad(), nd.grad);
    if (nd.parents[1]->requires_grad)
      K().axpy(-1, nd.grad.data(), nd.parents[1]->ensure_grad().data(),
               static_cast<size_t>(nd.grad.numel()));
  });
}

Var Tape::mul(Var a, Var b) {
  check_mine(a, "mul");
  check_mine(b, "mul");
  check_same_shape(a->value, b->value, "mul");
  Tensor out(a->value.shape());
  K().mul(a->value.data(), b->value.data(), out.data(), static_cast<size_t>(out.numel()));
  return make(std::move(out), {a, b}, [](Node& n) {
    const size_t len = static_cast<size_t>(n.grad.numel());
    if (n.parents[0]->requires_grad) {
      Tensor& ga = n.parents[0]->ensure_grad();
      const real* g = n.grad.data();
      const real* bv = n.parents[1]->value.data();
      for (size_t i = 0; i < len; ++i) ga.data()[i] += g[i] * bv[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& gb = n.parents[1]->ensure_grad();
      const real* g = n.grad.data();
      const real* av = n.parents[0]->value.data();
      for (size_t i = 0; i < len; ++i) gb.data()[i] += g[i] * av[i];
    }
  });
}

Var Tape::scale(Var x, real c) {
  check_mine(x, "scale");
  Tensor out = x->value;
  K().scale(c, out.data(), static_cast<size_t>(out.numel()));
  return make(std::move(out), {x}, [c](Node& n) {
    if (n.parents[0]->requires_grad)
      K().axpy(c, n.grad.data(), n.parents[0]->ensure_grad().data(),
               static_cast<size_t>(n.grad.numel()));
  });
}

Var Tape::relu(Var x) {
  check_mine(x, "relu");
  Tensor out(x->value.shape());
  K().relu(x->value.data(), out.data(), static_cast<size_t>(out.numel()));
  return make(std::move(out), {x}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    K().relu_grad(n.parents[0]->value.data(), n.grad.data(),
                  n.parents[0]->ensure_grad().data(), static_cast<size_t>(n.grad.numel()));
  });
}

Var Tape::dropout(Var x, real p, Rng& rng) {
  check_mine(x, "dropout");
  if (p <= 0) return x;
  if (p >= 1) fail("dropout rate must be < 1");
  const size_t len = static_cast<size_t>(x->value.numel());
  auto mask = std::make_shared<std::vector<real>>(len);
  const real keep_scale = 1 / (1 - p);
  Tensor out(x->value.shape());
  for (size_t i = 0; i < len; ++i) {
    (*mask)[i] = rng.uniform() >= p ? keep_scale : real(0);
    out.data()[i] = x->value.data()[i] * (*mask)[i];
  }
  return make(std::move(out), {x}, [mask](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    const real* g = n.grad.data();
    for (size_t i = 0; i < mask->size(); ++i) gx.data()[i] += g[i] * (*mask)[i];
  });
}

Var Tape::add_bias(Var x, Var b) {
  check_mine(x, "add_bias");
  check_mine(b, "add_bias");
  if (b->value.rank() != 1 || x->value.rank() < 1 ||
      x->value.shape().back() != b->value.dim(0))
    fail("add_bias: shape mismatch " + shape_str(x->value.shape()) + " vs " +
         shape_str(b->value.shape()));
  const int64_t d = b->value.dim(0);
  const int64_t rows = x->value.numel() / d;
  Tensor out = x->value;
  for (int64_t r = 0; r < rows; ++r)
    K().axpy(1, b->value.data(), out.data() + r * d, static_cast<size_t>(d));
  return make(std::move(out), {x, b}, [d, rows](Node& n) {
    if (n.parents[0]->requires_grad) accumulate(n.parents[0]->ensure_grad(), n.grad);
    if (n.parents[1]->requires_grad) {
      Tensor& gb = n.parents[1]->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        K().axpy(1, n.grad.data() + r * d, gb.data(), static_cast<size_t>(d));
    }
  });
}

Var Tape::add_rows(Var x, Tensor rows) {
  check_mine(x, "add_rows");
  if (x->value.rank() != 3 || rows.rank() != 2 || x->value.dim(1) != rows.dim(0) ||
      x->value.dim(2) != rows.dim(1))
    fail("add_rows: shape mismatch " + shape_str(x->value.shape()) + " vs " +
         shape_str(rows.shape()));
  const int64_t b = x->value.dim(0);
  const int64_t len = rows.numel();
  Tensor out = x->value;
  for (int64_t i = 0; i < b; ++i)
    K().axpy(1, rows.data(), out.data() + i * len, static_cast<size_t>(len));
  return make(std::move(out), {x}, [](Node& n) {
    if (n.parents[0]->requires_grad) accumulate(n.parents[0]->ensure_grad(), n.grad);
  });
}

Var Tape::add_mask(Var x, Tensor mask, int heads) {
  check_mine(x, "add_mask");
  if (x->value.rank() != 3 || mask.rank() != 3 ||
      x->value.dim(0) != mask.dim(0) * heads || x->value.dim(1) != mask.dim(1) ||
      x->value.dim(2) != mask.dim(2))
    fail("add_mask: shape mismatch " + shape_str(x->value.shape()) + " vs " +
         shape_str(mask.shape()));
  const int64_t bh = x->value.dim(0);
  const int64_t len = mask.dim(1) * mask.dim(2);
  Tensor out = x->value;
  for (int64_t i = 0; i < bh; ++i)
    K().axpy(1, mask.data() + (i / heads) * len, out.data() + i * len,
             static_cast<size_t>(len));
  return make(std::move(out), {x}, [](Node& n) {
    if (n.parents[0]->requires_grad) accumulate(n.parents[0]->ensure_grad(), n.grad);
  });
}

Var Tape::matmul(Var a, Var w) {
  check_mine(a, "matmul");
  check_mine(w, "matmul");
  if (a->value.rank() < 1 || w->value.rank() != 2 ||
      a->value.shape().back() != w->value.dim(0))
    fail("matmul: inner dimensions disagree " + shape_str(a->value.shape()) + " vs " +
         shape_str(w->value.shape()));
  const int64_t k = w->value.dim(0);
  const int64_t n = w->value.dim(1);
  const int64_t rows = a->value.numel() / k;
  Shape out_shape = a->value.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  K().matmul_nn(a->value.data(), w->value.data(), out.data(), static_cast<size_t>(rows),
                static_cast<size_t>(k), static_cast<size_t>(n));
  return make(std::move(out), {a, w}, [rows, k, n](Node& nd) {
    const real* g = nd.grad.data();
    if (nd.parents[0]->requires_grad) {
      Tensor& ga = nd.parents[0]->ensure_grad();
      K().matmul_nt(g, nd.parents[1]->value.data(), ga.data(), static_cast<size_t>(rows),
                    static_cast<size_t>(n), static_cast<size_t>(k));
    }
    if (nd.parents[1]->requires_grad) {
      Tensor& gw = nd.parents[1]->ensure_grad();
      K().matmul_tn(nd.parents[0]->value.data(), g, gw.data(), static_cast<size_t>(k),
                    static_cast<size_t>(rows), static_cast<size_t>(n));
    }
  });
}

Var Tape::linear(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

Var Tape::bmm(Var a, Var b) {
  check_mine(a, "bmm");
  check_mine(b, "bmm");
  if (a->value.rank() != 3 || b->value.rank() != 3 || a->value.dim(0) != b->value.dim(0) ||
      a->value.dim(2) != b->value.dim(1))
    fail("bmm: shape mismatch " + shape_str(a->value.shape()) + " vs " +
         shape_str(b->value.shape()));
  const int64_t bs = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2),
                n = b->value.dim(2);
  Tensor out({bs, m, n});
  for (int64_t i = 0; i < bs; ++i)
    K().matmul_nn(a->value.data() + i * m * k, b->value.data() + i * k * n,
                  out.data() + i * m * n, static_cast<size_t>(m), static_cast<size_t>(k),
                  static_cast<size_t>(n));
  return make(std::move(out), {a, b}, [bs, m, k, n](Node& nd) {
    for (int64_t i = 0; i < bs; ++i) {
      const real* g = nd.grad.data() + i * m * n;
      if (nd.parents[0]->requires_grad)
        K().matmul_nt(g, nd.parents[1]->value.data() + i * k * n,
                      nd.parents[0]->ensure_grad().data() + i * m * k,
                      static_cast<size_t>(m), static_cast<size_t>(n),
                      static_cast<size_t>(k));
      if (nd.parents[1]->requires_grad)
        K().matmul_tn(nd.parents[0]->value.data() + i * m * k, g,
                      nd.parents[1]->ensure_grad().data() + i * k * n,
                      static_cast<size_t>(k), static_cast<size_t>(m),
                      static_cast<size_t>(n));
    }
  });
}

Var Tape::bmm_nt(Var a, Var b) {
  check_mine(a, "bmm_nt");
  check_mine(b, "bmm_nt");
  if (a->value.rank() != 3 || b->value.rank() != 3 || a->value.dim(0) != b->value.dim(0) ||
      a->value.dim(2) != b->value.dim(2))
    fail("bmm_nt: shape mismatch " + shape_str(a->value.shape()) + " vs " +
         shape_str(b->value.shape()));
  const int64_t bs = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2),
                n = b->value.dim(1);
  Tensor out({bs, m, n});
  for (int64_t i = 0; i < bs; ++i)
    K().matmul_nt(a->value.data() + i * m * k, b->value.data() + i * n * k,
                  out.data() + i * m * n, static_cast<size_t>(m), static_cast<size_t>(k),
                  static_cast<size_t>(n));
  return make(std::move(out), {a, b}, [bs, m, k, n](Node& nd) {
    for (int64_t i = 0; i < bs; ++i) {
      const real* g = nd.grad.data() + i * m * n;
      if (nd.parents[0]->requires_grad)
        K().matmul_nn(g, nd.parents[1]->value.data() + i * n * k,
                      nd.parents[0]->ensure_grad().data() + i * m * k,
                      static_cast<size_t>(m), static_cast<size_t>(n),
                      static_cast<size_t>(k));
      if (nd.parents[1]->requires_grad)
        K().matmul_tn(g, nd.parents[0]->value.data() + i * m * k,
                      nd.parents[1]->ensure_grad().data() + i * n * k,
                      static_cast<size_t>(n), static_cast<size_t>(m),
                      static_cast<size_t>(k));
    }
  });
}

Var Tape::reshape(Var x, Shape shape) {
  check_mine(x, "reshape");
  if (shape_numel(shape) != x->value.numel())
    fail("reshape: element count mismatch " + shape_str(x->value.shape()) + " vs " +
         shape_str(shape));
  Tensor out = x->value;
  Tensor reshaped = Tensor::from(shape, std::vector<real>(out.data(), out.data() + out.numel()));
  return make(std::move(reshaped), {x}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    K().axpy(1, n.grad.data(), gx.data(), static_cast<size_t>(gx.numel()));
  });
}

Var Tape::split_heads(Var x, int heads) {
  check_mine(x, "split_heads");
  if (x->value.rank() != 3 || x->value.dim(2) % heads != 0)
    fail("split_heads: feature dim of " + shape_str(x->value.shape()) +
         " not divisible by " + std::to_string(heads) + " heads");
  const int64_t b = x->value.dim(0), s = x->value.dim(1), d = x->value.dim(2);
  const int64_t dh = d / heads;
  Tensor out({b * heads, s, dh});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t h = 0; h < heads; ++h)
      for (int64_t si = 0; si < s; ++si) {
        const real* src = x->value.data() + (bi * s + si) * d + h * dh;
        real* dst = out.data() + ((bi * heads + h) * s + si) * dh;
        for (int64_t j = 0; j < dh; ++j) dst[j] = src[j];
      }
  return make(std::move(out), {x}, [b, s, d, dh, heads](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t h = 0; h < heads; ++h)
        for (int64_t si = 0; si < s; ++si) {
          real* dst = gx.data() + (bi * s + si) * d + h * dh;
          const real* src = n.grad.data() + ((bi * heads + h) * s + si) * dh;
          for (int64_t j = 0; j < dh; ++j) dst[j] += src[j];
        }
  });
}

Var Tape::merge_heads(Var x, int heads) {
  check_mine(x, "merge_heads");
  if (x->value.rank() != 3 || x->value.dim(0) % heads != 0)
    fail("merge_heads: batch dim of " + shape_str(x->value.shape()) +
         " not divisible by " + std::to_string(heads) + " heads");
  const int64_t b = x->value.dim(0) / heads, s = x->value.dim(1), dh = x->value.dim(2);
  const int64_t d = dh * heads;
  Tensor out({b, s, d});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t h = 0; h < heads; ++h)
      for (int64_t si = 0; si < s; ++si) {
        const real* src = x->value.data() + ((bi * heads + h) * s + si) * dh;
        real* dst = out.data() + (bi * s + si) * d + h * dh;
        for (int64_t j = 0; j < dh; ++j) dst[j] = src[j];
      }
  return make(std::move(out), {x}, [b, s, d, dh, heads](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t h = 0; h < heads; ++h)
        for (int64_t si = 0; si < s; ++si) {
          real* dst = gx.data() + ((bi * heads + h) * s + si) * dh;
          const real* src = n.grad.data() + (bi * s + si) * d + h * dh;
          for (int64_t j = 0; j < dh; ++j) dst[j] += src[j];
        }
  });
}

Var Tape::channels_to_features(Var x) {
  check_mine(x, "channels_to_features");
  if (x->value.rank() != 4)
    fail("channels_to_features: expected rank-4 input, got " + shape_str(x->value.shape()));
  const int64_t b = x->value.dim(0), c = x->value.dim(1), t = x->value.dim(2),
                f = x->value.dim(3);
  Tensor out({b, t, c * f});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ci = 0; ci < c; ++ci)
      for (int64_t ti = 0; ti < t; ++ti) {
        const real* src = x->value.data() + ((bi * c + ci) * t + ti) * f;
        real* dst = out.data() + (bi * t + ti) * (c * f) + ci * f;
        for (int64_t fi = 0; fi < f; ++fi) dst[fi] = src[fi];
      }
  return make(std::move(out), {x}, [b, c, t, f](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t ci = 0; ci < c; ++ci)
        for (int64_t ti = 0; ti < t; ++ti) {
          real* dst = gx.data() + ((bi * c + ci) * t + ti) * f;
          const real* src = n.grad.data() + (bi * t + ti) * (c * f) + ci * f;
          for (int64_t fi = 0; fi < f; ++fi) dst[fi] += src[fi];
        }
  });
}

namespace {

struct AxisIter {
  int64_t outer, len, inner;
};

AxisIter axis_iter(const Tensor& t, int axis) {
  int a = axis < 0 ? static_cast<int>(t.rank()) + axis : axis;
  if (a < 0 || a >= static_cast<int>(t.rank()))
    fail("softmax: axis " + std::to_string(axis) + " out of range for " +
         shape_str(t.shape()));
  AxisIter it{1, t.shape()[static_cast<size_t>(a)], 1};
  for (int i = 0; i < a; ++i) it.outer *= t.shape()[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(a) + 1; i < t.rank(); ++i) it.inner *= t.shape()[i];
  return it;
}

}  // namespace

Var Tape::softmax(Var x, int axis) {
  check_mine(x, "softmax");
  const AxisIter it = axis_iter(x->value, axis);
  Tensor out(x->value.shape());
  const real* in = x->value.data();
  real* o = out.data();
  for (int64_t ou = 0; ou < it.outer; ++ou)
    for (int64_t in_i = 0; in_i < it.inner; ++in_i) {
      const int64_t base = ou * it.len * it.inner + in_i;
      real mx = in[base];
      for (int64_t k = 1; k < it.len; ++k)
        mx = std::max(mx, in[base + k * it.inner]);
      real denom = 0;
      for (int64_t k = 0; k < it.len; ++k) {
        real e = std::exp(in[base + k * it.inner] - mx);
        o[base + k * it.inner] = e;
        denom += e;
      }
      for (int64_t k = 0; k < it.len; ++k) o[base + k * it.inner] /= denom;
    }
  return make(std::move(out), {x}, [it](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    const real* y = n.value.data();
    const real* g = n.grad.data();
    for (int64_t ou = 0; ou < it.outer; ++ou)
      for (int64_t in_i = 0; in_i < it.inner; ++in_i) {
        const int64_t base = ou * it.len * it.inner + in_i;
        real dotgy = 0;
        for (int64_t k = 0; k < it.len; ++k) {
          const int64_t idx = base + k * it.inner;
          dotgy += g[idx] * y[idx];
        }
        for (int64_t k = 0; k < it.len; ++k) {
          const int64_t idx = base + k * it.inner;
          gx.data()[idx] += y[idx] * (g[idx] - dotgy);
        }
      }
  });
}

Var Tape::log_softmax(Var x) {
  check_mine(x, "log_softmax");
  if (x->value.rank() < 1) fail("log_softmax: scalar input");
  const int64_t d = x->value.shape().back();
  const int64_t rows = x->value.numel() / d;
  Tensor out(x->value.shape());
  const real* in = x->value.data();
  real* o = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const real* row = in + r * d;
    real mx = K().max(row, static_cast<size_t>(d));
    real denom = 0;
    for (int64_t k = 0; k < d; ++k) denom += std::exp(row[k] - mx);
    const real lse = mx + std::log(denom);
    for (int64_t k = 0; k < d; ++k) o[r * d + k] = row[k] - lse;
  }
  return make(std::move(out), {x}, [rows, d](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    const real* y = n.value.data();
    const real* g = n.grad.data();
    for (int64_t r = 0; r < rows; ++r) {
      real gsum = K().sum(g + r * d, static_cast<size_t>(d));
      for (int64_t k = 0; k < d; ++k) {
        const int64_t idx = r * d + k;
        gx.data()[idx] += g[idx] - std::exp(y[idx]) * gsum;
      }
    }
  });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, real eps) {
  check_mine(x, "layer_norm");
  check_mine(gain, "layer_norm");
  check_mine(bias, "layer_norm");
  const int64_t d = x->value.shape().back();
  if (gain->value.rank() != 1 || gain->value.dim(0) != d || bias->value.rank() != 1 ||
      bias->value.dim(0) != d)
    fail("layer_norm: gain/bias of " + shape_str(gain->value.shape()) +
         " do not match feature dim of " + shape_str(x->value.shape()));
  const int64_t rows = x->value.numel() / d;
  Tensor out(x->value.shape());
  auto xhat = std::make_shared<Tensor>(x->value.shape());
  auto inv_std = std::make_shared<std::vector<real>>(static_cast<size_t>(rows));
  const real* in = x->value.data();
  for (int64_t r = 0; r < rows; ++r) {
    const real* row = in + r * d;
    real mean = K().sum(row, static_cast<size_t>(d)) / static_cast<real>(d);
    real var = 0;
    for (int64_t k = 0; k < d; ++k) {
      real c = row[k] - mean;
      var += c * c;
    }
    var /= static_cast<real>(d);
    const real istd = 1 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(r)] = istd;
    for (int64_t k = 0; k < d; ++k) {
      real xh = (row[k] - mean) * istd;
      xhat->data()[r * d + k] = xh;
      out.data()[r * d + k] = xh * gain->value.data()[k] + bias->value.data()[k];
    }
  }
  return make(std::move(out), {x, gain, bias}, [rows, d, xhat, inv_std](Node& n) {
    const real* g = n.grad.data();
    const real* gainv = n.parents[1]->value.data();
    if (n.parents[2]->requires_grad) {
      Tensor& gb = n.parents[2]->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        K().axpy(1, g + r * d, gb.data(), static_cast<size_t>(d));
    }
    if (n.parents[1]->requires_grad) {
      Tensor& gg = n.parents[1]->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t k = 0; k < d; ++k)
          gg.data()[k] += g[r * d + k] * xhat->data()[r * d + k];
    }
    if (n.parents[0]->requires_grad) {
      Tensor& gx = n.parents[0]->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        real mean_gxh = 0, mean_gxh_xh = 0;
        for (int64_t k = 0; k < d; ++k) {
          const real gxh = g[r * d + k] * gainv[k];
          mean_gxh += gxh;
          mean_gxh_xh += gxh * xhat->data()[r * d + k];
        }
        mean_gxh /= static_cast<real>(d);
        mean_gxh_xh /= static_cast<real>(d);
        const real istd = (*inv_std)[static_cast<size_t>(r)];
        for (int64_t k = 0; k < d; ++k) {
          const real gxh = g[r * d + k] * gainv[k];
          gx.data()[r * d + k] +=
              istd * (gxh - mean_gxh - xhat->data()[r * d + k] * mean_gxh_xh);
        }
      }
    }
  });
}

Var Tape::embedding(Var table, const std::vector<std::vector<int>>& ids) {
  check_mine(table, "embedding");
  if (table->value.rank() != 2) fail("embedding: table must be rank-2");
  const int64_t v = table->value.dim(0), d = table->value.dim(1);
  const int64_t b = static_cast<int64_t>(ids.size());
  if (b == 0) fail("embedding: empty batch");
  const int64_t l = static_cast<int64_t>(ids[0].size());
  for (const auto& row : ids) {
    if (static_cast<int64_t>(row.size()) != l) fail("embedding: ragged id rows");
    for (int id : row)
      if (id < 0 || id >= v)
        fail("embedding: id " + std::to_string(id) + " out of range [0," +
             std::to_string(v) + ")");
  }
  Tensor out({b, l, d});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t li = 0; li < l; ++li) {
      const real* src = table->value.data() + ids[static_cast<size_t>(bi)][static_cast<size_t>(li)] * d;
      real* dst = out.data() + (bi * l + li) * d;
      for (int64_t k = 0; k < d; ++k) dst[k] = src[k];
    }
  auto ids_copy = std::make_shared<std::vector<std::vector<int>>>(ids);
  return make(std::move(out), {table}, [ids_copy, b, l, d](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gt = n.parents[0]->ensure_grad();
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t li = 0; li < l; ++li) {
        real* dst = gt.data() + (*ids_copy)[static_cast<size_t>(bi)][static_cast<size_t>(li)] * d;
        const real* src = n.grad.data() + (bi * l + li) * d;
        for (int64_t k = 0; k < d; ++k) dst[k] += src[k];
      }
  });
}

Var Tape::conv2d_s2(Var x, Var w, Var b) {
  check_mine(x, "conv2d_s2");
  check_mine(w, "conv2d_s2");
  check_mine(b, "conv2d_s2");
  if (x->value.rank() != 4 || w->value.rank() != 4 || w->value.dim(2) != 3 ||
      w->value.dim(3) != 3 || x->value.dim(1) != w->value.dim(1))
    fail("conv2d_s2: shape mismatch " + shape_str(x->value.shape()) + " vs " +
         shape_str(w->value.shape()));
  const int64_t bs = x->value.dim(0), c = x->value.dim(1), t = x->value.dim(2),
                f = x->value.dim(3);
  const int64_t o = w->value.dim(0);
  if (t < 3 || f < 3)
    fail("conv2d_s2: input " + shape_str(x->value.shape()) + " smaller than kernel");
  if (b->value.rank() != 1 || b->value.dim(0) != o)
    fail("conv2d_s2: bias shape " + shape_str(b->value.shape()) + " != out channels");
  const int64_t t2 = (t - 3) / 2 + 1, f2 = (f - 3) / 2 + 1;
  Tensor out({bs, o, t2, f2});
  const real* xv = x->value.data();
  const real* wv = w->value.data();
  for (int64_t bi = 0; bi < bs; ++bi)
    for (int64_t oi = 0; oi < o; ++oi)
      for (int64_t ti = 0; ti < t2; ++ti)
        for (int64_t fi = 0; fi < f2; ++fi) {
          real acc = b->value.data()[oi];
          for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t kt = 0; kt < 3; ++kt)
              for (int64_t kf = 0; kf < 3; ++kf)
                acc += xv[((bi * c + ci) * t + 2 * ti + kt) * f + 2 * fi + kf] *
                       wv[((oi * c + ci) * 3 + kt) * 3 + kf];
          out.data()[((bi * o + oi) * t2 + ti) * f2 + fi] = acc;
        }
  return make(std::move(out), {x, w, b}, [bs, c, t, f, o, t2, f2](Node& n) {
    const real* g = n.grad.data();
    const real* xv = n.parents[0]->value.data();
    const real* wv = n.parents[1]->value.data();
    real* gx = n.parents[0]->requires_grad ? n.parents[0]->ensure_grad().data() : nullptr;
    real* gw = n.parents[1]->requires_grad ? n.parents[1]->ensure_grad().data() : nullptr;
    real* gb = n.parents[2]->requires_grad ? n.parents[2]->ensure_grad().data() : nullptr;
    for (int64_t bi = 0; bi < bs; ++bi)
      for (int64_t oi = 0; oi < o; ++oi)
        for (int64_t ti = 0; ti < t2; ++ti)
          for (int64_t fi = 0; fi < f2; ++fi) {
            const real gv = g[((bi * o + oi) * t2 + ti) * f2 + fi];
            if (gb) gb[oi] += gv;
            for (int64_t ci = 0; ci < c; ++ci)
              for (int64_t kt = 0; kt < 3; ++kt)
                for (int64_t kf = 0; kf < 3; ++kf) {
                  const int64_t xi = ((bi * c + ci) * t + 2 * ti + kt) * f + 2 * fi + kf;
                  const int64_t wi = ((oi * c + ci) * 3 + kt) * 3 + kf;
                  if (gw) gw[wi] += gv * xv[xi];
                  if (gx) gx[xi] += gv * wv[wi];
                }
          }
  });
}

Var Tape::sum(Var x) {
  check_mine(x, "sum");
  Tensor out = Tensor::scalar(K().sum(x->value.data(), static_cast<size_t>(x->value.numel())));
  return make(std::move(out), {x}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    const real g = n.grad[0];
    for (int64_t i = 0; i < gx.numel(); ++i) gx.data()[i] += g;
  });
}

Var Tape::mean(Var x) {
  check_mine(x, "mean");
  const real inv = 1 / static_cast<real>(x->value.numel());
  Tensor out = Tensor::scalar(
      K().sum(x->value.data(), static_cast<size_t>(x->value.numel())) * inv);
  return make(std::move(out), {x}, [inv](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    const real g = n.grad[0] * inv;
    for (int64_t i = 0; i < gx.numel(); ++i) gx.data()[i] += g;
  });
}

Var Tape::add_scaled(Var a, real ca, Var b, real cb) {
  check_mine(a, "add_scaled");
  check_mine(b, "add_scaled");
  check_same_shape(a->value, b->value, "add_scaled");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i)
    out.data()[i] = ca * a->value.data()[i] + cb * b->value.data()[i];
  return make(std::move(out), {a, b}, [ca, cb](Node& n) {
    const size_t len = static_cast<size_t>(n.grad.numel());
    if (n.parents[0]->requires_grad)
      K().axpy(ca, n.grad.data(), n.parents[0]->ensure_grad().data(), len);
    if (n.parents[1]->requires_grad)
      K().axpy(cb, n.grad.data(), n.parents[1]->ensure_grad().data(), len);
  });
}

void Tape::backward(const Var& loss) {
  check_mine(loss, "backward");
  if (loss->value.numel() != 1) fail("backward: loss must be scalar");
  if (!loss->requires_grad)
    fail("backward: loss is not connected to any trainable parameter on this tape");
  loss->ensure_grad()[0] = 1;
  for (int64_t i = loss->id; i >= 0; --i) {
    Node& n = *nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(n);
  }
}

}  // namespace lyrikit::numeric
