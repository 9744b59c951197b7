// Copyright 2026 lyrikit authors
// Byte-pair-encoding subword model over normalized lyrics text.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lyrikit/common.hpp"

namespace lyrikit::bpe {

inline constexpr int kBlankId = 0;  // CTC blank
inline constexpr int kUnkId = 1;
// Shared sos/eos takes the last id, vocab_size - 1.

inline const std::string kBoundary = "▁";  // word-initial marker
inline const std::string kBlankToken = "<blank>";
inline const std::string kUnkToken = "<unk>";
inline const std::string kSosEosToken = "<sos/eos>";

// Lowercase, keep [a-z] and apostrophes, everything else becomes a word
// separator; runs of separators collapse.
std::string normalize(const std::string& text);

struct BpeModel {
  int vocab_size = 0;
  std::vector<std::string> id_to_token;                      // dense 0..vocab_size-1
  std::map<std::string, int> token_to_id;
  std::vector<std::pair<std::string, std::string>> merges;   // in learned order

  int sos_eos_id() const { return vocab_size - 1; }
};

// Greedy highest-frequency merges until the requested vocab size is reached
// or no pair occurs twice; ties break lexicographically. The result may be
// smaller than requested when merges run out.
BpeModel train_bpe(const std::vector<std::string>& corpus, int vocab_size);

// Applies merges in learned order; characters outside the model map to unk.
std::vector<int> encode(const BpeModel& model, const std::string& text);

// Concatenates token strings, boundary markers become spaces.
std::string decode_tokens(const BpeModel& model, const std::vector<int>& ids);

// Plain-text model file:
//   bpe-v1 <vocab_size>
//   <id>\t<token>            (vocab_size lines)
//   #merges
//   <left>\t<right>          (one line per merge, in order)
void save_bpe(const std::string& path, const BpeModel& model);
BpeModel load_bpe(const std::string& path);

}  // namespace lyrikit::bpe
