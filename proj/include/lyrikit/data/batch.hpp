// Copyright 2026 lyrikit authors
// Genre-pure batching with length sorting and bin-budget packing.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "lyrikit/data/manifest.hpp"
#include "lyrikit/numeric/tensor.hpp"

namespace lyrikit::data {

inline constexpr int kIgnoreId = -1;  // token padding marker

struct EncodedUtterance {
  std::string id;
  numeric::Tensor feats;     // T x 83, already normalized
  std::vector<int> tokens;   // subword ids, no specials
  GenreClass genre = GenreClass::kPop;
};

struct Batch {
  numeric::Tensor feats;                       // B x Tmax x 83, zero padded
  std::vector<int> feat_lens;                  // frames per item
  std::vector<std::vector<int>> token_ids;     // B x Lmax, padded with kIgnoreId
  std::vector<int> token_lens;
  GenreClass genre = GenreClass::kPop;         // one class per batch
  std::vector<std::string> ids;

  int64_t size() const { return feats.empty() ? 0 : feats.dim(0); }
};

// Groups by genre, sorts each group by frame count, then greedily fills
// batches while padded cells (B * Tmax * 83) stay within max_bins. The final
// batch order is shuffled deterministically from the seed. An utterance that
// alone exceeds max_bins is an error naming the utterance.
std::vector<Batch> make_batches(const std::vector<EncodedUtterance>& utts, int64_t max_bins,
                                uint64_t shuffle_seed);

}  // namespace lyrikit::data
