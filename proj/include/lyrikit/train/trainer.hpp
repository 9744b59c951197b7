// Copyright 2026 lyrikit authors
// Two-phase training loop: base training from scratch, then genre-adapter
// tuning with the base frozen except layer norms and the decoder's
// source-target attention.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "lyrikit/data/batch.hpp"
#include "lyrikit/loss/loss.hpp"
#include "lyrikit/model/model.hpp"
#include "lyrikit/tokenizer/bpe.hpp"
#include "lyrikit/train/optim.hpp"

namespace lyrikit::train {

struct TrainRunConfig {
  int epochs = 100;
  int64_t warmup = 25000;
  double lr_scale = 5.0;  // toy-friendly default; full recipes tune this
  int64_t max_bins = 5000000;
  uint64_t seed = 0;
  double grad_clip = 5.0;
  int keep_best = 5;  // checkpoints averaged into the final model
  loss::LossConfig loss;
  AdamConfig adam;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double dev_loss = 0;
  double dev_wer = 0;
  double lr = 0;
  int64_t steps = 0;
};

struct EvalResult {
  double loss = 0;
  double wer = 0;
};

// Adapter-phase trainability: adapters, every layer-norm gain/bias, and the
// decoder source-target MHA projections. Everything else stays frozen.
bool adapter_phase_trainable(const std::string& name);

// Sets trainable flags for adapter tuning. The model must have adapters.
void freeze_for_adapter_tuning(model::Model& m);

// Copies base-model weights into an adapter-bearing model; parameters missing
// from `base` must all be adapter parameters (left at their fresh init).
// Errors when `base` lacks base weights the model expects.
void load_base_state(model::Model& m, const numeric::ParamStore& base);

// Mean joint loss per utterance, plus greedy-decode WER when a tokenizer is
// given (wer = 0 otherwise).
EvalResult validate(model::Model& m, const std::vector<data::EncodedUtterance>& dev,
                    const loss::LossConfig& loss_cfg, int64_t max_bins,
                    const bpe::BpeModel* tokenizer);

class Trainer {
 public:
  Trainer(model::Model& m, TrainRunConfig cfg, const bpe::BpeModel& tokenizer)
      : model_(m), cfg_(cfg), tokenizer_(tokenizer), adam_(cfg.adam) {}

  // Runs (or resumes) the loop. Writes epoch<N>.ckpt / epoch<N>.opt /
  // metrics.jsonl per epoch and averaged.ckpt at the end. Returns the full
  // metrics history including epochs restored from a previous run.
  std::vector<EpochMetrics> run(const std::vector<data::EncodedUtterance>& train_utts,
                                const std::vector<data::EncodedUtterance>& dev_utts,
                                const std::string& outdir);

 private:
  double run_epoch(const std::vector<data::EncodedUtterance>& train_utts, int epoch);

  model::Model& model_;
  TrainRunConfig cfg_;
  const bpe::BpeModel& tokenizer_;
  Adam adam_;
};

std::vector<EpochMetrics> read_metrics_log(const std::string& path);

}  // namespace lyrikit::train
