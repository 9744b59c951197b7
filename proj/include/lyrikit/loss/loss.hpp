// Copyright 2026 lyrikit authors
// Training objectives: log-space CTC forward-backward, label-smoothed
// cross entropy, and their interpolation.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <vector>

#include "lyrikit/data/batch.hpp"
#include "lyrikit/numeric/tape.hpp"

namespace lyrikit::loss {

struct LossConfig {
  double alpha = 0.3;            // weight on the CTC term
  double label_smoothing = 0.0;  // 0.1 mirrors common recipes, off by default
};

// Pure log-space CTC for one utterance; grad is d(-log P)/d(logits).
struct CtcResult {
  double loss = 0;
  numeric::Tensor grad;  // T x V
};
CtcResult ctc_forward_backward(const numeric::Tensor& logits, const std::vector<int>& target,
                               int blank = 0);

// Batched CTC over padded logits [B,T,V] with per-item valid frame counts.
// Returns the mean of per-utterance losses. A target that cannot be aligned
// within its frame budget raises a "length violation" error.
numeric::Var ctc_loss_batch(numeric::Tape& tape, numeric::Var logits,
                            const std::vector<int>& logit_lens,
                            const std::vector<std::vector<int>>& targets,
                            std::vector<double>* per_item = nullptr);

// Single utterance, logits T x V.
numeric::Var ctc_loss(numeric::Tape& tape, numeric::Var logits, const std::vector<int>& target);

// Cross entropy over [B,L,V] logits against target_out rows padded with
// data::kIgnoreId. Per-item mean over non-ignored positions, then mean over
// items. An all-ignored item is an error.
numeric::Var s2s_loss_batch(numeric::Tape& tape, numeric::Var logits,
                            const std::vector<std::vector<int>>& target_out,
                            double label_smoothing = 0.0,
                            std::vector<double>* per_item = nullptr);

// alpha * l_ctc + (1 - alpha) * l_s2s, both finite scalars.
numeric::Var joint_loss(numeric::Tape& tape, numeric::Var l_ctc, numeric::Var l_s2s,
                        const LossConfig& cfg);

// Decoder targets for a batch: tokens + eos, padded with the ignore marker
// to (Lmax + 1) columns. Pairs with the model's [sos]+tokens decoder input.
std::vector<std::vector<int>> make_decoder_targets(const data::Batch& batch, int sos_eos_id);

}  // namespace lyrikit::loss
