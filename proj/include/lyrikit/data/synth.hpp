// Copyright 2026 lyrikit authors
// Synthetic tone-plus-noise corpus with genre-dependent acoustics, for
// desk-scale end-to-end runs.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "lyrikit/data/manifest.hpp"

namespace lyrikit::data {

struct SynthConfig {
  uint64_t seed = 0;
  int n_lines = 100;
  // Genre mix in percent; counts follow the largest-remainder rule.
  int pct_metal = 35;
  int pct_pop = 59;
  int pct_hiphop = 6;
  std::string outdir;
  std::string manifest_name = "manifest.jsonl";
};

// Each line is a sequence of pitched tones (one per pseudo-lyrics word) over
// broadband noise. Metal lines bury the tone in noise (low SNR), pop lines
// are clean (high SNR), hiphop lines run at a faster word rate. Audio goes to
// <outdir>/audio/, the manifest to <outdir>/<manifest_name>. Returns the
// manifest path. Same seed, same bytes.
std::string synth_corpus(const SynthConfig& cfg);

const std::vector<std::string>& synth_lexicon();

// Largest-remainder split of n into three genre counts (metal, pop, hiphop).
std::vector<int> genre_counts(int n_lines, int pct_metal, int pct_pop, int pct_hiphop);

}  // namespace lyrikit::data
