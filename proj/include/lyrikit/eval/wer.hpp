// Copyright 2026 lyrikit authors
// Word error rate via word-level Levenshtein alignment.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "lyrikit/common.hpp"

namespace lyrikit::eval {

struct WerResult {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t ref_words = 0;
  double wer = 0;  // (S+D+I)/ref_words, may exceed 1 when insertions dominate

  int64_t errors() const { return substitutions + deletions + insertions; }
};

// Lowercased whitespace tokens.
std::vector<std::string> wer_tokenize(const std::string& text);

// Unit-cost alignment; among cost-minimal alignments the reported counts come
// from the backtrace with tie order substitution < deletion < insertion.
// The reference must be non-empty after normalization.
WerResult wer(const std::string& ref, const std::string& hyp);
WerResult wer_tokens(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

struct WerTotals {
  int64_t substitutions = 0, deletions = 0, insertions = 0, ref_words = 0;
  int64_t lines = 0;
  double line_wer_sum = 0;

  void add(const WerResult& r) {
    substitutions += r.substitutions;
    deletions += r.deletions;
    insertions += r.insertions;
    ref_words += r.ref_words;
    lines += 1;
    line_wer_sum += r.wer;
  }
  // Pooled convention: total errors over total reference words.
  double corpus_wer() const {
    return ref_words == 0 ? 0.0
                          : static_cast<double>(substitutions + deletions + insertions) /
                                static_cast<double>(ref_words);
  }
  double mean_line_wer() const { return lines == 0 ? 0.0 : line_wer_sum / static_cast<double>(lines); }
};

}  // namespace lyrikit::eval
