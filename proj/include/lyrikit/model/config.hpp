// Copyright 2026 lyrikit authors
// Model hyperparameters and adapter placement variants.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>

#include "lyrikit/common.hpp"

namespace lyrikit::model {

// Which adapter sites exist:
//   kNone           - plain base model, zero adapter parameters
//   kGenreMha       - encoder site + decoder site B (after source-target MHA)
//   kGenreMhaMaskMha- encoder site + decoder sites A (after masked MHA) and B
//   kSharedAblation - sites as kGenreMha, one parameter set shared by genres
enum class AdapterPlacement { kNone, kGenreMha, kGenreMhaMaskMha, kSharedAblation };

enum class NormStyle { kPost, kPre };

const char* placement_name(AdapterPlacement p);   // none|mha|mha-maskmha|shared
AdapterPlacement placement_from_name(const std::string& name);
const char* norm_style_name(NormStyle n);         // post|pre
NormStyle norm_style_from_name(const std::string& name);

struct ModelConfig {
  int d_model = 512;
  int heads = 8;
  int ffn_dim = 2048;
  int n_enc = 12;
  int n_dec = 6;
  int adapter_dim = 256;
  int vocab_size = 0;
  int feat_dim = 83;
  AdapterPlacement placement = AdapterPlacement::kNone;
  NormStyle norm_style = NormStyle::kPost;
  double dropout = 0.1;

  void validate() const;
  // Canonical JSON: sorted keys, no whitespace. Stable across runs so it can
  // live inside checkpoints byte-for-byte.
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  bool has_encoder_adapter() const { return placement != AdapterPlacement::kNone; }
  bool has_decoder_adapter_a() const { return placement == AdapterPlacement::kGenreMhaMaskMha; }
  bool has_decoder_adapter_b() const { return placement != AdapterPlacement::kNone; }
  bool shared_adapters() const { return placement == AdapterPlacement::kSharedAblation; }
};

}  // namespace lyrikit::model
