// Copyright 2026 lyrikit authors
// The genre-conditioned transformer: convolutional subsampling frontend,
// encoder/decoder stacks with per-genre bottleneck adapters, CTC and
// sequence-to-sequence projection heads.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "lyrikit/data/batch.hpp"
#include "lyrikit/model/config.hpp"
#include "lyrikit/numeric/params.hpp"

namespace lyrikit::model {

using numeric::BoundParams;
using numeric::Tape;
using numeric::Tensor;
using numeric::Var;

struct TrainContext {
  bool training = false;
  Rng* rng = nullptr;  // dropout source, required when training and dropout > 0
};

struct EncoderOut {
  Var h;                     // B x T' x d
  std::vector<int> lengths;  // valid subsampled frames per item
};

struct ForwardOut {
  Var ctc_logits;            // B x T' x V
  Var s2s_logits;            // B x (L+1) x V
  std::vector<int> enc_lens;
};

class Model {
 public:
  Model(ModelConfig cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  numeric::ParamStore& params() { return params_; }
  const numeric::ParamStore& params() const { return params_; }

  // Copies values from another store by name; every name must exist here
  // with a matching shape and cover this model exactly.
  void load_state(const numeric::ParamStore& src);

  // Convolutional subsampling: one length through both stride-2 convs.
  static int64_t subsampled_len(int64_t t);
  static Tensor positional_encoding(int64_t len, int64_t d);

  // Subsampling frontend alone: feats B x T x 83 -> B x T' x d with scaled
  // sinusoidal positions added. T must be >= 7 so that T' >= 1.
  Var poly_embed(Tape& tape, const BoundParams& bp, const Tensor& feats,
                 const TrainContext& ctx) const;

  // Token embedding x sqrt(d) plus positional encoding.
  Var lyrics_embed(Tape& tape, const BoundParams& bp,
                   const std::vector<std::vector<int>>& ids) const;

  // feats B x T x 83 with per-item lengths; T must be >= 7.
  EncoderOut encoder_forward(Tape& tape, const BoundParams& bp, const Tensor& feats,
                             const std::vector<int>& feat_lens, data::GenreClass genre,
                             const TrainContext& ctx) const;

  // tokens_in already starts with sos; rows padded with blank (0) to a common
  // length. Causal over token positions, cross-attention masked by enc lens.
  Var decoder_forward(Tape& tape, const BoundParams& bp, Var h,
                      const std::vector<int>& enc_lens,
                      const std::vector<std::vector<int>>& tokens_in,
                      data::GenreClass genre, const TrainContext& ctx) const;

  // Full pass over a batch: builds [sos]+tokens decoder input internally.
  ForwardOut forward(Tape& tape, const BoundParams& bp, const data::Batch& batch,
                     const TrainContext& ctx) const;

  // out = h + Up(ReLU(Down(h))) with the genre's (or shared) parameters.
  Var adapter_forward(Tape& tape, const BoundParams& bp, const std::string& site,
                      Var h, data::GenreClass genre) const;

  int sos_eos_id() const { return cfg_.vocab_size - 1; }

  // Parameter count of one adapter (down + up, weights + biases).
  static int64_t adapter_param_count(int d_model, int adapter_dim);

 private:
  Var mha(Tape& tape, const BoundParams& bp, const std::string& prefix, Var q_in, Var kv_in,
          const Tensor& mask, const TrainContext& ctx) const;
  Var ffn(Tape& tape, const BoundParams& bp, const std::string& prefix, Var x,
          const TrainContext& ctx) const;
  Var sublayer(Tape& tape, const BoundParams& bp, const std::string& norm_name, Var x,
               const std::function<Var(Var)>& fn, const TrainContext& ctx) const;
  Var dropout(Tape& tape, Var x, const TrainContext& ctx) const;
  std::string adapter_group(data::GenreClass genre) const;

  ModelConfig cfg_;
  numeric::ParamStore params_;
};

}  // namespace lyrikit::model
