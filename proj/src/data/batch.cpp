// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/data/batch.hpp"

#include <algorithm>

namespace lyrikit::data {

namespace {

Batch assemble(const std::vector<const EncodedUtterance*>& items) {
  Batch b;
  b.genre = items.front()->genre;
  const int64_t bs = static_cast<int64_t>(items.size());
  int64_t tmax = 0, lmax = 0;
  for (const EncodedUtterance* u : items) {
    tmax = std::max(tmax, u->feats.dim(0));
    lmax = std::max(lmax, static_cast<int64_t>(u->tokens.size()));
  }
  const int64_t d = items.front()->feats.dim(1);
  b.feats = numeric::Tensor({bs, tmax, d});
  for (int64_t i = 0; i < bs; ++i) {
    const EncodedUtterance* u = items[static_cast<size_t>(i)];
    b.ids.push_back(u->id);
    b.feat_lens.push_back(static_cast<int>(u->feats.dim(0)));
    b.token_lens.push_back(static_cast<int>(u->tokens.size()));
    for (int64_t t = 0; t < u->feats.dim(0); ++t)
      for (int64_t k = 0; k < d; ++k) b.feats.at(i, t, k) = u->feats.at(t, k);
    std::vector<int> padded(static_cast<size_t>(lmax), kIgnoreId);
    std::copy(u->tokens.begin(), u->tokens.end(), padded.begin());
    b.token_ids.push_back(std::move(padded));
  }
  return b;
}

}  // namespace

std::vector<Batch> make_batches(const std::vector<EncodedUtterance>& utts, int64_t max_bins,
                                uint64_t shuffle_seed) {
  std::vector<Batch> batches;
  for (int g = 0; g < kNumGenres; ++g) {
    std::vector<const EncodedUtterance*> group;
    for (const EncodedUtterance& u : utts)
      if (static_cast<int>(u.genre) == g) group.push_back(&u);
    if (group.empty()) continue;
    std::stable_sort(group.begin(), group.end(),
                     [](const EncodedUtterance* a, const EncodedUtterance* b) {
                       return a->feats.dim(0) < b->feats.dim(0);
                     });
    std::vector<const EncodedUtterance*> current;
    int64_t tmax = 0;
    for (const EncodedUtterance* u : group) {
      const int64_t t = u->feats.dim(0);
      const int64_t d = u->feats.dim(1);
      if (t * d > max_bins)
        fail("utterance \"" + u->id + "\" alone exceeds the batch-bin budget (" +
             std::to_string(t * d) + " > " + std::to_string(max_bins) + " cells)");
      const int64_t new_tmax = std::max(tmax, t);
      const int64_t cells = static_cast<int64_t>(current.size() + 1) * new_tmax * d;
      if (!current.empty() && cells > max_bins) {
        batches.push_back(assemble(current));
        current.clear();
        tmax = 0;
      }
      current.push_back(u);
      tmax = std::max(tmax, t);
    }
    if (!current.empty()) batches.push_back(assemble(current));
  }
  Rng rng(shuffle_seed);
  rng.shuffle(batches);
  return batches;
}

}  // namespace lyrikit::data
