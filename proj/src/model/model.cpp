// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <json.hpp>

namespace lyrikit::model {

using data::GenreClass;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

const char* placement_name(AdapterPlacement p) {
  switch (p) {
    case AdapterPlacement::kNone: return "none";
    case AdapterPlacement::kGenreMha: return "mha";
    case AdapterPlacement::kGenreMhaMaskMha: return "mha-maskmha";
    case AdapterPlacement::kSharedAblation: return "shared";
  }
  return "none";
}

AdapterPlacement placement_from_name(const std::string& name) {
  if (name == "none") return AdapterPlacement::kNone;
  if (name == "mha") return AdapterPlacement::kGenreMha;
  if (name == "mha-maskmha") return AdapterPlacement::kGenreMhaMaskMha;
  if (name == "shared") return AdapterPlacement::kSharedAblation;
  usage_fail("unknown adapter placement: " + name + " (expected none|mha|mha-maskmha|shared)");
}

const char* norm_style_name(NormStyle n) { return n == NormStyle::kPost ? "post" : "pre"; }

NormStyle norm_style_from_name(const std::string& name) {
  if (name == "post") return NormStyle::kPost;
  if (name == "pre") return NormStyle::kPre;
  usage_fail("unknown norm style: " + name + " (expected post|pre)");
}

void ModelConfig::validate() const {
  if (d_model <= 0 || heads <= 0 || d_model % heads != 0)
    usage_fail("d_model (" + std::to_string(d_model) + ") must be divisible by heads (" +
               std::to_string(heads) + ")");
  if (adapter_dim <= 0 || adapter_dim >= d_model)
    usage_fail("adapter_dim must lie in (0, d_model)");
  if (vocab_size < 4) usage_fail("vocab_size must be at least 4 (blank, unk, token, sos/eos)");
  if (n_enc < 1 || n_dec < 1) usage_fail("need at least one encoder and one decoder block");
  if (ffn_dim < 1) usage_fail("ffn_dim must be positive");
  if (feat_dim < 7) usage_fail("feat_dim too small for the two stride-2 convolutions");
  if (dropout < 0 || dropout >= 1) usage_fail("dropout must be in [0,1)");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["adapter_dim"] = adapter_dim;
  j["d_model"] = d_model;
  j["dropout"] = dropout;
  j["feat_dim"] = feat_dim;
  j["ffn_dim"] = ffn_dim;
  j["heads"] = heads;
  j["n_dec"] = n_dec;
  j["n_enc"] = n_enc;
  j["norm_style"] = norm_style_name(norm_style);
  j["placement"] = placement_name(placement);
  j["vocab_size"] = vocab_size;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig c;
  c.adapter_dim = j.at("adapter_dim").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.feat_dim = j.at("feat_dim").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.n_dec = j.at("n_dec").get<int>();
  c.n_enc = j.at("n_enc").get<int>();
  c.norm_style = norm_style_from_name(j.at("norm_style").get<std::string>());
  c.placement = placement_from_name(j.at("placement").get<std::string>());
  c.vocab_size = j.at("vocab_size").get<int>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace {

constexpr real kMaskValue = real(-1e30);

Tensor xavier(numeric::Shape shape, int64_t fan_in, int64_t fan_out, Rng& rng,
              double gain = 1.0) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor::rand_uniform(std::move(shape), rng, static_cast<real>(-limit),
                              static_cast<real>(limit));
}

int64_t conv_out(int64_t n) { return n >= 3 ? (n - 3) / 2 + 1 : 0; }

}  // namespace

int64_t Model::subsampled_len(int64_t t) { return conv_out(conv_out(t)); }

int64_t Model::adapter_param_count(int d_model, int adapter_dim) {
  const int64_t d = d_model, m = adapter_dim;
  return d * m + m + m * d + d;
}

Model::Model(ModelConfig cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  const int d = cfg_.d_model, ffn_dim = cfg_.ffn_dim, v = cfg_.vocab_size;

  auto add_linear = [&](const std::string& name, int in, int out) {
    params_.add(name + ".weight", xavier({in, out}, in, out, rng));
    params_.add(name + ".bias", Tensor::zeros({out}));
  };
  auto add_norm = [&](const std::string& name) {
    params_.add(name + ".gain", Tensor::full({d}, 1));
    params_.add(name + ".bias", Tensor::zeros({d}));
  };
  auto add_mha = [&](const std::string& prefix) {
    for (const char* part : {".q", ".k", ".v", ".out"}) add_linear(prefix + part, d, d);
  };
  auto add_ffn = [&](const std::string& prefix) {
    add_linear(prefix + ".w1", d, ffn_dim);
    add_linear(prefix + ".w2", ffn_dim, d);
  };

  // Frontend: the base model's parameters come first so that the random
  // stream is identical across placements.
  params_.add("frontend.conv1.weight", xavier({d, 1, 3, 3}, 9, d * 9, rng));
  params_.add("frontend.conv1.bias", Tensor::zeros({d}));
  params_.add("frontend.conv2.weight", xavier({d, d, 3, 3}, d * 9, d * 9, rng));
  params_.add("frontend.conv2.bias", Tensor::zeros({d}));
  const int f2 = static_cast<int>(conv_out(conv_out(cfg_.feat_dim)));
  add_linear("frontend.out", d * f2, d);

  for (int i = 0; i < cfg_.n_enc; ++i) {
    const std::string blk = "encoder.block" + std::to_string(i);
    add_mha(blk + ".self_mha");
    add_norm(blk + ".norm_mha");
    add_ffn(blk + ".ffn");
    add_norm(blk + ".norm_ffn");
  }
  if (cfg_.norm_style == NormStyle::kPre) add_norm("encoder.norm_final");

  params_.add("decoder.embed.weight",
              Tensor::randn({v, d}, rng, static_cast<real>(1.0 / std::sqrt(double(d)))));
  for (int i = 0; i < cfg_.n_dec; ++i) {
    const std::string blk = "decoder.block" + std::to_string(i);
    add_mha(blk + ".self_mha");
    add_norm(blk + ".norm_self");
    add_mha(blk + ".st_mha");
    add_norm(blk + ".norm_st");
    add_ffn(blk + ".ffn");
    add_norm(blk + ".norm_ffn");
  }
  if (cfg_.norm_style == NormStyle::kPre) add_norm("decoder.norm_final");

  add_linear("ctc_head", d, v);
  add_linear("s2s_head", d, v);

  // Adapters last. Down-projections get a small random init so their weights
  // receive gradient as soon as the up-projection moves; up-projections start
  // at exact zero, which makes every adapter an exact identity at insertion.
  const int m = cfg_.adapter_dim;
  std::vector<std::string> groups;
  if (cfg_.shared_adapters()) {
    groups = {"shared"};
  } else {
    groups = {"pop", "metal", "hiphop"};
  }
  auto add_adapter = [&](const std::string& site) {
    for (const std::string& g : groups) {
      const std::string base = site + "." + g;
      params_.add(base + ".down.weight", xavier({d, m}, d, m, rng, 0.1));
      params_.add(base + ".down.bias", Tensor::zeros({m}));
      params_.add(base + ".up.weight", Tensor::zeros({m, d}));
      params_.add(base + ".up.bias", Tensor::zeros({d}));
    }
  };
  if (cfg_.has_encoder_adapter())
    for (int i = 0; i < cfg_.n_enc; ++i)
      add_adapter("encoder.block" + std::to_string(i) + ".adapter");
  if (cfg_.has_decoder_adapter_a())
    for (int i = 0; i < cfg_.n_dec; ++i)
      add_adapter("decoder.block" + std::to_string(i) + ".adapter_a");
  if (cfg_.has_decoder_adapter_b())
    for (int i = 0; i < cfg_.n_dec; ++i)
      add_adapter("decoder.block" + std::to_string(i) + ".adapter_b");
}

void Model::load_state(const numeric::ParamStore& src) {
  if (src.size() != params_.size())
    fail("parameter count mismatch: model has " + std::to_string(params_.size()) +
         ", state has " + std::to_string(src.size()));
  for (numeric::Parameter& p : params_.all()) {
    const numeric::Parameter& s = src.get(p.name);
    if (s.value.shape() != p.value.shape())
      fail("parameter " + p.name + " shape mismatch: " + numeric::shape_str(p.value.shape()) +
           " vs " + numeric::shape_str(s.value.shape()));
    p.value = s.value;
  }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

Tensor Model::positional_encoding(int64_t len, int64_t d) {
  Tensor pe({len, d});
  for (int64_t pos = 0; pos < len; ++pos)
    for (int64_t i = 0; i < d; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      pe.at(pos, i) = static_cast<real>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

Var Model::dropout(Tape& tape, Var x, const TrainContext& ctx) const {
  if (!ctx.training || cfg_.dropout <= 0) return x;
  if (!ctx.rng) fail("training forward pass needs an RNG for dropout");
  return tape.dropout(x, static_cast<real>(cfg_.dropout), *ctx.rng);
}

Var Model::sublayer(Tape& tape, const BoundParams& bp, const std::string& norm_name, Var x,
                    const std::function<Var(Var)>& fn, const TrainContext& ctx) const {
  const Var gain = bp[norm_name + ".gain"];
  const Var bias = bp[norm_name + ".bias"];
  if (cfg_.norm_style == NormStyle::kPost)
    return tape.layer_norm(tape.add(x, dropout(tape, fn(x), ctx)), gain, bias);
  return tape.add(x, dropout(tape, fn(tape.layer_norm(x, gain, bias)), ctx));
}

Var Model::mha(Tape& tape, const BoundParams& bp, const std::string& prefix, Var q_in,
               Var kv_in, const Tensor& mask, const TrainContext& ctx) const {
  const int h = cfg_.heads;
  Var q = tape.linear(q_in, bp[prefix + ".q.weight"], bp[prefix + ".q.bias"]);
  Var k = tape.linear(kv_in, bp[prefix + ".k.weight"], bp[prefix + ".k.bias"]);
  Var v = tape.linear(kv_in, bp[prefix + ".v.weight"], bp[prefix + ".v.bias"]);
  Var qh = tape.split_heads(q, h);
  Var kh = tape.split_heads(k, h);
  Var vh = tape.split_heads(v, h);
  const real scale = static_cast<real>(1.0 / std::sqrt(double(cfg_.d_model / h)));
  Var scores = tape.scale(tape.bmm_nt(qh, kh), scale);
  scores = tape.add_mask(scores, mask, h);
  Var attn = dropout(tape, tape.softmax(scores), ctx);
  Var context = tape.merge_heads(tape.bmm(attn, vh), h);
  return tape.linear(context, bp[prefix + ".out.weight"], bp[prefix + ".out.bias"]);
}

Var Model::ffn(Tape& tape, const BoundParams& bp, const std::string& prefix, Var x,
               const TrainContext& ctx) const {
  Var hidden = tape.relu(tape.linear(x, bp[prefix + ".w1.weight"], bp[prefix + ".w1.bias"]));
  hidden = dropout(tape, hidden, ctx);
  return tape.linear(hidden, bp[prefix + ".w2.weight"], bp[prefix + ".w2.bias"]);
}

std::string Model::adapter_group(GenreClass genre) const {
  return cfg_.shared_adapters() ? "shared" : data::genre_name(genre);
}

Var Model::adapter_forward(Tape& tape, const BoundParams& bp, const std::string& site,
                           Var h, GenreClass genre) const {
  if (cfg_.placement == AdapterPlacement::kNone)
    fail("adapter_forward called on a model without adapters");
  const std::string base = site + "." + adapter_group(genre);
  Var a = tape.linear(h, bp[base + ".down.weight"], bp[base + ".down.bias"]);
  a = tape.relu(a);
  a = tape.linear(a, bp[base + ".up.weight"], bp[base + ".up.bias"]);
  return tape.add(h, a);
}

Var Model::poly_embed(Tape& tape, const BoundParams& bp, const Tensor& feats,
                      const TrainContext& ctx) const {
  if (feats.rank() != 3 || feats.dim(2) != cfg_.feat_dim)
    fail("frontend expects B x T x " + std::to_string(cfg_.feat_dim) + " features, got " +
         numeric::shape_str(feats.shape()));
  const int64_t b = feats.dim(0), t = feats.dim(1);
  if (subsampled_len(t) < 1)
    fail("utterance too short for the subsampling frontend: " + std::to_string(t) +
         " frames (need at least 7)");
  // Two stride-2 conv blocks, flatten, linear, scale, position.
  Var x = tape.reshape(tape.constant(feats), {b, 1, t, cfg_.feat_dim});
  x = tape.relu(tape.conv2d_s2(x, bp["frontend.conv1.weight"], bp["frontend.conv1.bias"]));
  x = tape.relu(tape.conv2d_s2(x, bp["frontend.conv2.weight"], bp["frontend.conv2.bias"]));
  x = tape.channels_to_features(x);  // B x T' x (d * F2)
  x = tape.linear(x, bp["frontend.out.weight"], bp["frontend.out.bias"]);
  x = tape.scale(x, static_cast<real>(std::sqrt(double(cfg_.d_model))));
  x = tape.add_rows(x, positional_encoding(x->value.dim(1), cfg_.d_model));
  return dropout(tape, x, ctx);
}

Var Model::lyrics_embed(Tape& tape, const BoundParams& bp,
                        const std::vector<std::vector<int>>& ids) const {
  Var y = tape.embedding(bp["decoder.embed.weight"], ids);
  y = tape.scale(y, static_cast<real>(std::sqrt(double(cfg_.d_model))));
  return tape.add_rows(y, positional_encoding(y->value.dim(1), cfg_.d_model));
}

EncoderOut Model::encoder_forward(Tape& tape, const BoundParams& bp, const Tensor& feats,
                                  const std::vector<int>& feat_lens, GenreClass genre,
                                  const TrainContext& ctx) const {
  const int64_t b = feats.rank() == 3 ? feats.dim(0) : 0;
  if (static_cast<int64_t>(feat_lens.size()) != b) fail("feature length vector size mismatch");
  for (int len : feat_lens)
    if (subsampled_len(len) < 1)
      fail("utterance too short for the subsampling frontend: " + std::to_string(len) +
           " frames (need at least 7)");
  Var x = poly_embed(tape, bp, feats, ctx);
  const int64_t t2 = x->value.dim(1);

  std::vector<int> enc_lens;
  for (int len : feat_lens) enc_lens.push_back(static_cast<int>(subsampled_len(len)));

  // Key-padding mask shared by every block.
  Tensor mask({b, t2, t2});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t qi = 0; qi < t2; ++qi)
      for (int64_t ki = 0; ki < t2; ++ki)
        mask.at(bi, qi, ki) = ki < enc_lens[static_cast<size_t>(bi)] ? real(0) : kMaskValue;

  for (int i = 0; i < cfg_.n_enc; ++i) {
    const std::string blk = "encoder.block" + std::to_string(i);
    x = sublayer(tape, bp, blk + ".norm_mha", x,
                 [&](Var in) { return mha(tape, bp, blk + ".self_mha", in, in, mask, ctx); },
                 ctx);
    if (cfg_.has_encoder_adapter()) x = adapter_forward(tape, bp, blk + ".adapter", x, genre);
    x = sublayer(tape, bp, blk + ".norm_ffn", x,
                 [&](Var in) { return ffn(tape, bp, blk + ".ffn", in, ctx); }, ctx);
  }
  if (cfg_.norm_style == NormStyle::kPre)
    x = tape.layer_norm(x, bp["encoder.norm_final.gain"], bp["encoder.norm_final.bias"]);
  return {x, enc_lens};
}

Var Model::decoder_forward(Tape& tape, const BoundParams& bp, Var h,
                           const std::vector<int>& enc_lens,
                           const std::vector<std::vector<int>>& tokens_in, GenreClass genre,
                           const TrainContext& ctx) const {
  const int64_t b = h->value.dim(0);
  const int64_t t2 = h->value.dim(1);
  if (static_cast<int64_t>(tokens_in.size()) != b) fail("decoder batch size mismatch");
  const int64_t l = static_cast<int64_t>(tokens_in[0].size());

  Var y = dropout(tape, lyrics_embed(tape, bp, tokens_in), ctx);

  Tensor causal({b, l, l});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t qi = 0; qi < l; ++qi)
      for (int64_t ki = 0; ki < l; ++ki)
        causal.at(bi, qi, ki) = ki <= qi ? real(0) : kMaskValue;
  Tensor cross({b, l, t2});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t qi = 0; qi < l; ++qi)
      for (int64_t ki = 0; ki < t2; ++ki)
        cross.at(bi, qi, ki) = ki < enc_lens[static_cast<size_t>(bi)] ? real(0) : kMaskValue;

  for (int i = 0; i < cfg_.n_dec; ++i) {
    const std::string blk = "decoder.block" + std::to_string(i);
    y = sublayer(tape, bp, blk + ".norm_self", y,
                 [&](Var in) { return mha(tape, bp, blk + ".self_mha", in, in, causal, ctx); },
                 ctx);
    if (cfg_.has_decoder_adapter_a())
      y = adapter_forward(tape, bp, blk + ".adapter_a", y, genre);
    y = sublayer(tape, bp, blk + ".norm_st", y,
                 [&](Var in) { return mha(tape, bp, blk + ".st_mha", in, h, cross, ctx); },
                 ctx);
    if (cfg_.has_decoder_adapter_b())
      y = adapter_forward(tape, bp, blk + ".adapter_b", y, genre);
    y = sublayer(tape, bp, blk + ".norm_ffn", y,
                 [&](Var in) { return ffn(tape, bp, blk + ".ffn", in, ctx); }, ctx);
  }
  if (cfg_.norm_style == NormStyle::kPre)
    y = tape.layer_norm(y, bp["decoder.norm_final.gain"], bp["decoder.norm_final.bias"]);
  return y;
}

ForwardOut Model::forward(Tape& tape, const BoundParams& bp, const data::Batch& batch,
                          const TrainContext& ctx) const {
  EncoderOut enc = encoder_forward(tape, bp, batch.feats, batch.feat_lens, batch.genre, ctx);

  // Decoder input: sos then the tokens, padded with blank.
  int64_t lmax = 0;
  for (int len : batch.token_lens) lmax = std::max<int64_t>(lmax, len);
  std::vector<std::vector<int>> tokens_in;
  for (size_t i = 0; i < batch.token_ids.size(); ++i) {
    // Padding rows use blank (0); causal masking plus the loss ignore marker
    // keep padded positions out of every result.
    std::vector<int> row(static_cast<size_t>(lmax) + 1, 0);
    row[0] = sos_eos_id();
    for (int j = 0; j < batch.token_lens[i]; ++j)
      row[static_cast<size_t>(j) + 1] = batch.token_ids[i][static_cast<size_t>(j)];
    tokens_in.push_back(std::move(row));
  }
  Var dec = decoder_forward(tape, bp, enc.h, enc.lengths, tokens_in, batch.genre, ctx);

  ForwardOut out;
  out.ctc_logits = tape.linear(enc.h, bp["ctc_head.weight"], bp["ctc_head.bias"]);
  out.s2s_logits = tape.linear(dec, bp["s2s_head.weight"], bp["s2s_head.bias"]);
  out.enc_lens = enc.lengths;
  return out;
}

}  // namespace lyrikit::model
