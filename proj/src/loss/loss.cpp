// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/loss/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lyrikit::loss {

using numeric::Tape;
using numeric::Tensor;
using numeric::Var;

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// Row-wise log softmax into a double matrix.
std::vector<std::vector<double>> log_softmax_rows(const Tensor& logits, int64_t rows,
                                                  int64_t v, int64_t row_offset = 0) {
  std::vector<std::vector<double>> out(static_cast<size_t>(rows),
                                       std::vector<double>(static_cast<size_t>(v)));
  for (int64_t t = 0; t < rows; ++t) {
    const real* row = logits.data() + (row_offset + t) * v;
    double mx = row[0];
    for (int64_t k = 1; k < v; ++k) mx = std::max(mx, static_cast<double>(row[k]));
    double denom = 0;
    for (int64_t k = 0; k < v; ++k) denom += std::exp(row[k] - mx);
    const double lse = mx + std::log(denom);
    for (int64_t k = 0; k < v; ++k) out[static_cast<size_t>(t)][static_cast<size_t>(k)] = row[k] - lse;
  }
  return out;
}

}  // namespace

CtcResult ctc_forward_backward(const Tensor& logits, const std::vector<int>& target,
                               int blank) {
  if (logits.rank() != 2) fail("ctc: logits must be T x V");
  const int64_t t_len = logits.dim(0), v = logits.dim(1);
  const int64_t l = static_cast<int64_t>(target.size());
  for (int tok : target) {
    if (tok == blank) fail("ctc: target contains the blank id");
    if (tok < 0 || tok >= v) fail("ctc: target id " + std::to_string(tok) + " out of range");
  }
  int64_t required = l;
  for (int64_t i = 1; i < l; ++i)
    if (target[static_cast<size_t>(i)] == target[static_cast<size_t>(i - 1)]) ++required;
  if (t_len < required)
    fail("ctc length violation: target needs " + std::to_string(required) +
         " frames but only " + std::to_string(t_len) + " are available");

  const auto logp = log_softmax_rows(logits, t_len, v);
  const int64_t s_len = 2 * l + 1;
  auto label_at = [&](int64_t s) {
    return s % 2 == 0 ? blank : target[static_cast<size_t>((s - 1) / 2)];
  };

  std::vector<std::vector<double>> alpha(static_cast<size_t>(t_len),
                                         std::vector<double>(static_cast<size_t>(s_len), kLogZero));
  alpha[0][0] = logp[0][static_cast<size_t>(blank)];
  if (s_len > 1) alpha[0][1] = logp[0][static_cast<size_t>(label_at(1))];
  for (int64_t t = 1; t < t_len; ++t)
    for (int64_t s = 0; s < s_len; ++s) {
      double acc = alpha[static_cast<size_t>(t - 1)][static_cast<size_t>(s)];
      if (s >= 1) acc = log_add(acc, alpha[static_cast<size_t>(t - 1)][static_cast<size_t>(s - 1)]);
      if (s >= 2 && label_at(s) != blank && label_at(s) != label_at(s - 2))
        acc = log_add(acc, alpha[static_cast<size_t>(t - 1)][static_cast<size_t>(s - 2)]);
      alpha[static_cast<size_t>(t)][static_cast<size_t>(s)] =
          acc + logp[static_cast<size_t>(t)][static_cast<size_t>(label_at(s))];
    }
  double log_p = alpha[static_cast<size_t>(t_len - 1)][static_cast<size_t>(s_len - 1)];
  if (s_len > 1)
    log_p = log_add(log_p, alpha[static_cast<size_t>(t_len - 1)][static_cast<size_t>(s_len - 2)]);

  std::vector<std::vector<double>> beta(static_cast<size_t>(t_len),
                                        std::vector<double>(static_cast<size_t>(s_len), kLogZero));
  beta[static_cast<size_t>(t_len - 1)][static_cast<size_t>(s_len - 1)] =
      logp[static_cast<size_t>(t_len - 1)][static_cast<size_t>(blank)];
  if (s_len > 1)
    beta[static_cast<size_t>(t_len - 1)][static_cast<size_t>(s_len - 2)] =
        logp[static_cast<size_t>(t_len - 1)][static_cast<size_t>(label_at(s_len - 2))];
  for (int64_t t = t_len - 2; t >= 0; --t)
    for (int64_t s = s_len - 1; s >= 0; --s) {
      double acc = beta[static_cast<size_t>(t + 1)][static_cast<size_t>(s)];
      if (s + 1 < s_len) acc = log_add(acc, beta[static_cast<size_t>(t + 1)][static_cast<size_t>(s + 1)]);
      if (s + 2 < s_len && label_at(s + 2) != blank && label_at(s + 2) != label_at(s))
        acc = log_add(acc, beta[static_cast<size_t>(t + 1)][static_cast<size_t>(s + 2)]);
      beta[static_cast<size_t>(t)][static_cast<size_t>(s)] =
          acc + logp[static_cast<size_t>(t)][static_cast<size_t>(label_at(s))];
    }

  CtcResult res;
  res.loss = -log_p;
  res.grad = Tensor({t_len, v});
  for (int64_t t = 0; t < t_len; ++t) {
    std::vector<double> occupancy(static_cast<size_t>(v), kLogZero);
    for (int64_t s = 0; s < s_len; ++s) {
      const int k = label_at(s);
      // alpha and beta both carry the frame-t emission; divide once.
      occupancy[static_cast<size_t>(k)] =
          log_add(occupancy[static_cast<size_t>(k)],
                  alpha[static_cast<size_t>(t)][static_cast<size_t>(s)] +
                      beta[static_cast<size_t>(t)][static_cast<size_t>(s)] -
                      logp[static_cast<size_t>(t)][static_cast<size_t>(k)]);
    }
    for (int64_t k = 0; k < v; ++k) {
      const double posterior =
          occupancy[static_cast<size_t>(k)] == kLogZero
              ? 0.0
              : std::exp(occupancy[static_cast<size_t>(k)] - log_p);
      res.grad.at(t, k) = static_cast<real>(
          std::exp(logp[static_cast<size_t>(t)][static_cast<size_t>(k)]) - posterior);
    }
  }
  return res;
}

Var ctc_loss_batch(Tape& tape, Var logits, const std::vector<int>& logit_lens,
                   const std::vector<std::vector<int>>& targets,
                   std::vector<double>* per_item) {
  if (logits->value.rank() != 3) fail("ctc: batched logits must be B x T x V");
  const int64_t b = logits->value.dim(0), t_max = logits->value.dim(1),
                v = logits->value.dim(2);
  if (static_cast<int64_t>(logit_lens.size()) != b ||
      static_cast<int64_t>(targets.size()) != b)
    fail("ctc: batch size mismatch");

  auto full_grad = std::make_shared<Tensor>(logits->value.shape());
  double total = 0;
  if (per_item) per_item->clear();
  for (int64_t i = 0; i < b; ++i) {
    const int64_t t_i = logit_lens[static_cast<size_t>(i)];
    if (t_i < 1 || t_i > t_max) fail("ctc: invalid length for batch item " + std::to_string(i));
    Tensor item({t_i, v});
    for (int64_t t = 0; t < t_i; ++t)
      for (int64_t k = 0; k < v; ++k) item.at(t, k) = logits->value.at(i, t, k);
    CtcResult r = ctc_forward_backward(item, targets[static_cast<size_t>(i)]);
    total += r.loss;
    if (per_item) per_item->push_back(r.loss);
    for (int64_t t = 0; t < t_i; ++t)
      for (int64_t k = 0; k < v; ++k)
        full_grad->at(i, t, k) = r.grad.at(t, k) / static_cast<real>(b);
  }

  Tensor value = Tensor::scalar(static_cast<real>(total / static_cast<double>(b)));
  return tape.custom(std::move(value), {logits}, [full_grad](numeric::Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const real upstream = n.grad[0];
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += upstream * (*full_grad)[i];
  });
}

Var ctc_loss(Tape& tape, Var logits, const std::vector<int>& target) {
  if (logits->value.rank() != 2) fail("ctc: logits must be T x V");
  const int64_t t = logits->value.dim(0), v = logits->value.dim(1);
  Var batched = tape.reshape(logits, {1, t, v});
  return ctc_loss_batch(tape, batched, {static_cast<int>(t)}, {target});
}

Var s2s_loss_batch(Tape& tape, Var logits, const std::vector<std::vector<int>>& target_out,
                   double label_smoothing, std::vector<double>* per_item) {
  if (logits->value.rank() != 3) fail("cross entropy: logits must be B x L x V");
  const int64_t b = logits->value.dim(0), l = logits->value.dim(1), v = logits->value.dim(2);
  if (static_cast<int64_t>(target_out.size()) != b) fail("cross entropy: batch size mismatch");

  auto grad = std::make_shared<Tensor>(logits->value.shape());
  double total = 0;
  if (per_item) per_item->clear();
  const double eps = label_smoothing;
  for (int64_t i = 0; i < b; ++i) {
    const auto& row_targets = target_out[static_cast<size_t>(i)];
    if (static_cast<int64_t>(row_targets.size()) != l)
      fail("cross entropy: target row length mismatch");
    int64_t valid = 0;
    for (int tok : row_targets)
      if (tok != data::kIgnoreId) ++valid;
    if (valid == 0) fail("cross entropy: batch item " + std::to_string(i) + " is all-ignored");

    const auto logp = log_softmax_rows(logits->value, l, v, i * l);
    double item_loss = 0;
    for (int64_t p = 0; p < l; ++p) {
      const int tok = row_targets[static_cast<size_t>(p)];
      if (tok == data::kIgnoreId) continue;
      if (tok < 0 || tok >= v) fail("cross entropy: target id out of range");
      double pos_loss = -(1 - eps) * logp[static_cast<size_t>(p)][static_cast<size_t>(tok)];
      if (eps > 0) {
        double mean_logp = 0;
        for (int64_t k = 0; k < v; ++k) mean_logp += logp[static_cast<size_t>(p)][static_cast<size_t>(k)];
        pos_loss -= eps * mean_logp / static_cast<double>(v);
      }
      item_loss += pos_loss;
      const double scale = 1.0 / (static_cast<double>(valid) * static_cast<double>(b));
      for (int64_t k = 0; k < v; ++k) {
        const double soft = std::exp(logp[static_cast<size_t>(p)][static_cast<size_t>(k)]);
        const double q = (k == tok ? 1 - eps : 0.0) + eps / static_cast<double>(v);
        grad->at(i, p, k) = static_cast<real>((soft - q) * scale);
      }
    }
    item_loss /= static_cast<double>(valid);
    total += item_loss;
    if (per_item) per_item->push_back(item_loss);
  }

  Tensor value = Tensor::scalar(static_cast<real>(total / static_cast<double>(b)));
  return tape.custom(std::move(value), {logits}, [grad](numeric::Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const real upstream = n.grad[0];
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += upstream * (*grad)[i];
  });
}

Var joint_loss(Tape& tape, Var l_ctc, Var l_s2s, const LossConfig& cfg) {
  if (cfg.alpha < 0 || cfg.alpha > 1) fail("joint loss: alpha must lie in [0,1]");
  if (l_ctc->value.numel() != 1 || l_s2s->value.numel() != 1)
    fail("joint loss: inputs must be scalars");
  if (!l_ctc->value.all_finite() || !l_s2s->value.all_finite())
    fail("joint loss: non-finite component loss");
  return tape.add_scaled(l_ctc, static_cast<real>(cfg.alpha), l_s2s,
                         static_cast<real>(1 - cfg.alpha));
}

std::vector<std::vector<int>> make_decoder_targets(const data::Batch& batch, int sos_eos_id) {
  int64_t lmax = 0;
  for (int len : batch.token_lens) lmax = std::max<int64_t>(lmax, len);
  std::vector<std::vector<int>> out;
  for (size_t i = 0; i < batch.token_ids.size(); ++i) {
    std::vector<int> row(static_cast<size_t>(lmax) + 1, data::kIgnoreId);
    for (int j = 0; j < batch.token_lens[i]; ++j)
      row[static_cast<size_t>(j)] = batch.token_ids[i][static_cast<size_t>(j)];
    row[static_cast<size_t>(batch.token_lens[i])] = sos_eos_id;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace lyrikit::loss
