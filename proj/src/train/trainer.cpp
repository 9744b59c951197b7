// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lyrikit/decode/decode.hpp"
#include "lyrikit/eval/wer.hpp"
#include "lyrikit/model/checkpoint.hpp"

namespace lyrikit::train {

namespace fs = std::filesystem;
using data::Batch;
using data::EncodedUtterance;
using model::BoundParams;
using model::Model;
using numeric::Tape;
using numeric::Var;

namespace {

std::vector<std::vector<int>> batch_targets(const Batch& batch) {
  std::vector<std::vector<int>> out;
  for (size_t i = 0; i < batch.token_ids.size(); ++i)
    out.emplace_back(batch.token_ids[i].begin(),
                     batch.token_ids[i].begin() + batch.token_lens[i]);
  return out;
}

uint64_t epoch_seed(uint64_t seed, int epoch, uint64_t salt) {
  // splitmix-style scramble keeps per-epoch streams independent of each other.
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<uint64_t>(epoch) + salt);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct BatchLosses {
  double ctc = 0;
  double s2s = 0;
  double joint = 0;
};

// Forward + losses for one batch; grads optionally collected.
BatchLosses batch_loss(Model& m, const Batch& batch, const loss::LossConfig& loss_cfg,
                       bool with_grad, Rng* dropout_rng, numeric::GradMap* grads) {
  Tape tape;
  BoundParams bp = BoundParams::bind(tape, m.params(), with_grad);
  model::TrainContext ctx;
  ctx.training = with_grad;
  ctx.rng = dropout_rng;
  model::ForwardOut fo = m.forward(tape, bp, batch, ctx);

  Var l_ctc =
      loss::ctc_loss_batch(tape, fo.ctc_logits, fo.enc_lens, batch_targets(batch), nullptr);
  Var l_s2s = loss::s2s_loss_batch(tape, fo.s2s_logits,
                                   loss::make_decoder_targets(batch, m.sos_eos_id()),
                                   loss_cfg.label_smoothing, nullptr);
  Var joint = loss::joint_loss(tape, l_ctc, l_s2s, loss_cfg);
  if (grads) *grads = numeric::compute_gradients(tape, joint, bp);
  return {static_cast<double>(l_ctc->value[0]), static_cast<double>(l_s2s->value[0]),
          static_cast<double>(joint->value[0])};
}

std::string ckpt_path(const std::string& outdir, int epoch) {
  return (fs::path(outdir) / ("epoch" + std::to_string(epoch) + ".ckpt")).string();
}

std::string opt_path(const std::string& outdir, int epoch) {
  return (fs::path(outdir) / ("epoch" + std::to_string(epoch) + ".opt")).string();
}

nlohmann::json metrics_to_json(const EpochMetrics& m) {
  nlohmann::json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  j["dev_loss"] = m.dev_loss;
  j["dev_wer"] = m.dev_wer;
  j["lr"] = m.lr;
  j["steps"] = m.steps;
  return j;
}

}  // namespace

bool adapter_phase_trainable(const std::string& name) {
  return name.find(".adapter") != std::string::npos ||
         name.find(".norm") != std::string::npos ||
         name.find(".st_mha.") != std::string::npos;
}

void freeze_for_adapter_tuning(Model& m) {
  if (m.config().placement == model::AdapterPlacement::kNone)
    usage_fail("adapter tuning requires a placement other than none");
  for (numeric::Parameter& p : m.params().all()) p.trainable = adapter_phase_trainable(p.name);
}

void load_base_state(Model& m, const numeric::ParamStore& base) {
  // Every base parameter the model expects must be present.
  for (numeric::Parameter& p : m.params().all()) {
    const bool is_adapter = p.name.find(".adapter") != std::string::npos;
    if (!base.has(p.name)) {
      if (is_adapter) continue;  // fresh init stands
      fail("checkpoint lacks base weights: missing " + p.name);
    }
    const numeric::Parameter& s = base.get(p.name);
    if (s.value.shape() != p.value.shape())
      fail("parameter " + p.name + " shape mismatch against checkpoint");
    p.value = s.value;
  }
}

EvalResult validate(Model& m, const std::vector<EncodedUtterance>& dev,
                    const loss::LossConfig& loss_cfg, int64_t max_bins,
                    const bpe::BpeModel* tokenizer) {
  if (dev.empty()) fail("validation set is empty");
  std::vector<Batch> batches = data::make_batches(dev, max_bins, 0);
  double loss_sum = 0;
  int64_t n = 0;
  for (const Batch& b : batches) {
    BatchLosses l = batch_loss(m, b, loss_cfg, false, nullptr, nullptr);
    loss_sum += l.joint * static_cast<double>(b.size());
    n += b.size();
  }
  EvalResult res;
  res.loss = loss_sum / static_cast<double>(n);
  if (tokenizer) {
    eval::WerTotals totals;
    for (const EncodedUtterance& u : dev) {
      const std::vector<int> hyp_ids = decode::greedy_decode(m, u.feats, u.genre);
      const std::string hyp = bpe::decode_tokens(*tokenizer, hyp_ids);
      const std::string ref = bpe::decode_tokens(*tokenizer, u.tokens);
      totals.add(eval::wer(ref, hyp));
    }
    res.wer = totals.corpus_wer();
  }
  return res;
}

double Trainer::run_epoch(const std::vector<EncodedUtterance>& train_utts, int epoch) {
  std::vector<Batch> batches =
      data::make_batches(train_utts, cfg_.max_bins, epoch_seed(cfg_.seed, epoch, 1));
  Rng dropout_rng(epoch_seed(cfg_.seed, epoch, 2));
  double loss_sum = 0;
  int64_t n = 0;
  for (const Batch& batch : batches) {
    numeric::GradMap grads;
    BatchLosses l = batch_loss(model_, batch, cfg_.loss, true, &dropout_rng, &grads);
    if (!std::isfinite(l.joint))
      fail("non-finite loss at epoch " + std::to_string(epoch) + " step " +
           std::to_string(adam_.steps() + 1) + " (batch starting with id " + batch.ids[0] +
           ")");
    clip_global_norm(grads, cfg_.grad_clip);
    const double lr =
        noam_lr(adam_.steps() + 1, model_.config().d_model, cfg_.warmup, cfg_.lr_scale);
    adam_.step(model_.params(), grads, lr);
    loss_sum += l.joint * static_cast<double>(batch.size());
    n += batch.size();
  }
  return loss_sum / static_cast<double>(n);
}

std::vector<EpochMetrics> Trainer::run(const std::vector<EncodedUtterance>& train_utts,
                                       const std::vector<EncodedUtterance>& dev_utts,
                                       const std::string& outdir) {
  if (train_utts.empty()) fail("training set is empty");
  fs::create_directories(outdir);
  const std::string metrics_path = (fs::path(outdir) / "metrics.jsonl").string();

  // Resume from completed epochs when the log and checkpoints line up.
  std::vector<EpochMetrics> history;
  if (fs::exists(metrics_path)) {
    history = read_metrics_log(metrics_path);
    while (!history.empty() && !fs::exists(ckpt_path(outdir, history.back().epoch)))
      history.pop_back();
    if (!history.empty()) {
      const int last = history.back().epoch;
      model::Checkpoint ckpt = model::load_checkpoint(ckpt_path(outdir, last));
      model_.load_state(ckpt.params);
      if (fs::exists(opt_path(outdir, last))) adam_.load(opt_path(outdir, last));
    }
  }

  std::ofstream metrics_out(metrics_path, std::ios::app);
  if (!metrics_out) fail("cannot write metrics log: " + metrics_path);

  for (int epoch = static_cast<int>(history.size()) + 1; epoch <= cfg_.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = run_epoch(train_utts, epoch);
    EvalResult dev = validate(model_, dev_utts, cfg_.loss, cfg_.max_bins, &tokenizer_);
    m.dev_loss = dev.loss;
    m.dev_wer = dev.wer;
    m.steps = adam_.steps();
    m.lr = noam_lr(std::max<int64_t>(1, adam_.steps()), model_.config().d_model, cfg_.warmup,
                   cfg_.lr_scale);
    save_checkpoint(ckpt_path(outdir, epoch), model_.config(), model_.params());
    adam_.save(opt_path(outdir, epoch));
    metrics_out << metrics_to_json(m).dump() << "\n";
    metrics_out.flush();
    history.push_back(m);
  }

  // Final model: elementwise mean of the best keep_best epochs by dev loss.
  std::vector<const EpochMetrics*> ranked;
  for (const EpochMetrics& m : history) ranked.push_back(&m);
  std::stable_sort(ranked.begin(), ranked.end(), [](const EpochMetrics* a, const EpochMetrics* b) {
    return a->dev_loss < b->dev_loss;
  });
  const size_t k = std::min<size_t>(static_cast<size_t>(std::max(1, cfg_.keep_best)),
                                    ranked.size());
  std::vector<std::string> best_paths;
  for (size_t i = 0; i < k; ++i) best_paths.push_back(ckpt_path(outdir, ranked[i]->epoch));
  model::Checkpoint averaged = model::average_checkpoints(best_paths);
  save_checkpoint((fs::path(outdir) / "averaged.ckpt").string(), averaged.config,
                  averaged.params);
  return history;
}

std::vector<EpochMetrics> read_metrics_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read metrics log: " + path);
  std::vector<EpochMetrics> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    EpochMetrics m;
    m.epoch = j.at("epoch").get<int>();
    m.train_loss = j.at("train_loss").get<double>();
    m.dev_loss = j.at("dev_loss").get<double>();
    m.dev_wer = j.at("dev_wer").get<double>();
    m.lr = j.at("lr").get<double>();
    m.steps = j.at("steps").get<int64_t>();
    out.push_back(m);
  }
  return out;
}

}  // namespace lyrikit::train
