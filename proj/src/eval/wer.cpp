// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/eval/wer.hpp"

#include <cctype>
#include <sstream>

namespace lyrikit::eval {

std::vector<std::string> wer_tokenize(const std::string& text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (unsigned char c : text) lowered.push_back(static_cast<char>(std::tolower(c)));
  std::istringstream in(lowered);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

WerResult wer_tokens(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) fail("wer: reference is empty after normalization");
  const size_t r = ref.size(), h = hyp.size();
  std::vector<std::vector<int>> cost(r + 1, std::vector<int>(h + 1, 0));
  for (size_t i = 0; i <= r; ++i) cost[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= h; ++j) cost[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= r; ++i)
    for (size_t j = 1; j <= h; ++j) {
      const int sub = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int del = cost[i - 1][j] + 1;
      const int ins = cost[i][j - 1] + 1;
      cost[i][j] = std::min({sub, del, ins});
    }

  WerResult res;
  res.ref_words = static_cast<int64_t>(r);
  // Backtrace with tie order substitution < deletion < insertion.
  size_t i = r, j = h;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && cost[i][j] == cost[i - 1][j - 1] && ref[i - 1] == hyp[j - 1]) {
      --i;
      --j;
    } else if (i > 0 && j > 0 && cost[i][j] == cost[i - 1][j - 1] + 1) {
      ++res.substitutions;
      --i;
      --j;
    } else if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      ++res.deletions;
      --i;
    } else {
      ++res.insertions;
      --j;
    }
  }
  res.wer = static_cast<double>(res.errors()) / static_cast<double>(res.ref_words);
  return res;
}

WerResult wer(const std::string& ref, const std::string& hyp) {
  return wer_tokens(wer_tokenize(ref), wer_tokenize(hyp));
}

}  // namespace lyrikit::eval
