// Copyright 2026 lyrikit authors
// Joint CTC/attention beam search with incremental CTC prefix scoring.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <utility>
#include <vector>

#include "lyrikit/model/model.hpp"

namespace lyrikit::decode {

struct DecodeConfig {
  int beam = 10;
  double penalty = 0.0;      // per emitted token, added to the joint score
  double ctc_weight = 0.3;
  double max_len_ratio = 1.0;  // output length cap relative to T'

  void validate() const {
    if (beam < 1) usage_fail("beam must be >= 1");
    if (ctc_weight < 0 || ctc_weight > 1) usage_fail("ctc weight must lie in [0,1]");
    if (max_len_ratio <= 0) usage_fail("max length ratio must be positive");
  }
};

// Incremental prefix-probability DP over the blank-augmented CTC lattice.
// States carry, per frame, the log probability of the paths that collapse to
// exactly the prefix and end in a non-blank (r_nb) or blank (r_b) frame.
class CtcPrefixScorer {
 public:
  CtcPrefixScorer(numeric::Tensor logprobs, int blank, int eos);

  struct State {
    std::vector<double> r_nb, r_b;
  };

  State initial() const;

  // c != blank: returns {log psi(prefix + c), state for prefix + c}.
  // c == eos: returns {log P(collapse == prefix), unchanged state}.
  std::pair<double, State> score(const std::vector<int>& prefix, int c,
                                 const State& st) const;

  int frames() const { return t_; }

 private:
  numeric::Tensor logp_;  // T x V
  int t_;
  int v_;
  int blank_;
  int eos_;
};

struct Hypothesis {
  std::vector<int> tokens;  // emitted tokens, no sos / eos / blank
  double att_logp = 0;
  double ctc_logp = 0;
  double joint = 0;
  CtcPrefixScorer::State ctc_state;
};

struct BeamSearchResult {
  Hypothesis best;
  std::vector<Hypothesis> finished;  // joint-descending
  int enc_frames = 0;
};

// Single-utterance joint search: joint = (1-w) * attention + w * ctc_prefix
// + penalty * length. Ends a hypothesis on eos; force-ends survivors at the
// length cap. Ties break toward shorter, then lexicographically smaller
// token sequences.
BeamSearchResult beam_search(model::Model& m, const numeric::Tensor& feats,
                             data::GenreClass genre, const DecodeConfig& cfg);

// Pure argmax decoding of the S2S head (no CTC term).
std::vector<int> greedy_decode(model::Model& m, const numeric::Tensor& feats,
                               data::GenreClass genre, int max_len = -1);

}  // namespace lyrikit::decode
