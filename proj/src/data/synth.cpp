// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lyrikit/features/wav.hpp"

namespace lyrikit::data {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kRate = 16000;

struct GenreProfile {
  double tone_amp;
  double noise_amp;
  double tone_sec;   // voiced part of a word slot
  double gap_sec;    // silence (noise only) after each word
  int min_words;
  int max_words;
};

GenreProfile profile_for(GenreClass g) {
  switch (g) {
    case GenreClass::kMetal: return {0.12, 0.30, 0.18, 0.07, 3, 6};
    case GenreClass::kPop: return {0.50, 0.02, 0.18, 0.07, 3, 6};
    case GenreClass::kHiphop: return {0.40, 0.05, 0.12, 0.04, 6, 9};
  }
  return {0.5, 0.02, 0.18, 0.07, 3, 6};
}

}  // namespace

const std::vector<std::string>& synth_lexicon() {
  static const std::vector<std::string> words = {
      "la",   "love", "night", "fire", "rain",  "gold",  "heart", "road",
      "time", "sky",  "run",   "dream", "stone", "wave",  "sun",   "cry"};
  return words;
}

std::vector<int> genre_counts(int n_lines, int pct_metal, int pct_pop, int pct_hiphop) {
  const int total_pct = pct_metal + pct_pop + pct_hiphop;
  if (total_pct <= 0) fail("genre mix percentages must sum to a positive value");
  const double scale = static_cast<double>(n_lines) / total_pct;
  const double exact[3] = {pct_metal * scale, pct_pop * scale, pct_hiphop * scale};
  std::vector<int> counts(3);
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    counts[static_cast<size_t>(i)] = static_cast<int>(std::floor(exact[i]));
    assigned += counts[static_cast<size_t>(i)];
  }
  // Hand out the remainder by descending fractional part, ties to lower index.
  std::vector<int> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&exact, &counts](int a, int b) {
    return exact[a] - counts[static_cast<size_t>(a)] > exact[b] - counts[static_cast<size_t>(b)];
  });
  for (int i = 0; assigned < n_lines; ++i, ++assigned)
    ++counts[static_cast<size_t>(order[static_cast<size_t>(i % 3)])];
  return counts;
}

std::string synth_corpus(const SynthConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.outdir.empty()) fail("synth_corpus: outdir not set");
  fs::create_directories(fs::path(cfg.outdir) / "audio");

  const std::vector<int> counts = genre_counts(cfg.n_lines, cfg.pct_metal, cfg.pct_pop,
                                               cfg.pct_hiphop);
  std::vector<GenreClass> line_genres;
  for (int i = 0; i < counts[0]; ++i) line_genres.push_back(GenreClass::kMetal);
  for (int i = 0; i < counts[1]; ++i) line_genres.push_back(GenreClass::kPop);
  for (int i = 0; i < counts[2]; ++i) line_genres.push_back(GenreClass::kHiphop);

  Rng rng(cfg.seed);
  rng.shuffle(line_genres);

  const auto& lexicon = synth_lexicon();
  std::vector<Utterance> utts;
  char idbuf[32];
  for (int li = 0; li < cfg.n_lines; ++li) {
    const GenreClass genre = line_genres[static_cast<size_t>(li)];
    const GenreProfile prof = profile_for(genre);
    const int n_words = static_cast<int>(rng.uniform_int(prof.min_words, prof.max_words));

    std::string text;
    std::vector<int> word_ids(static_cast<size_t>(n_words));
    for (int w = 0; w < n_words; ++w) {
      const int idx = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(lexicon.size()) - 1));
      word_ids[static_cast<size_t>(w)] = idx;
      if (w) text.push_back(' ');
      text += lexicon[static_cast<size_t>(idx)];
    }

    const double pad = 0.1;
    const int word_len = static_cast<int>((prof.tone_sec + prof.gap_sec) * kRate);
    const int tone_len = static_cast<int>(prof.tone_sec * kRate);
    const int total = static_cast<int>(2 * pad * kRate) + n_words * word_len;

    features::AudioBuffer audio;
    audio.rate = kRate;
    audio.samples.assign(static_cast<size_t>(total), 0);
    for (int i = 0; i < total; ++i)
      audio.samples[static_cast<size_t>(i)] =
          static_cast<real>(prof.noise_amp * rng.uniform(-1.0, 1.0));
    const int ramp = kRate / 200;  // 5 ms fade against clicks
    for (int w = 0; w < n_words; ++w) {
      const int start = static_cast<int>(pad * kRate) + w * word_len;
      const double freq =
          220.0 * std::pow(2.0, word_ids[static_cast<size_t>(w)] / 12.0);
      for (int i = 0; i < tone_len; ++i) {
        double env = 1.0;
        if (i < ramp) env = static_cast<double>(i) / ramp;
        if (tone_len - i < ramp) env = static_cast<double>(tone_len - i) / ramp;
        audio.samples[static_cast<size_t>(start + i)] +=
            static_cast<real>(prof.tone_amp * env * std::sin(2 * kPi * freq * i / kRate));
      }
    }

    std::snprintf(idbuf, sizeof(idbuf), "syn%06d", li);
    Utterance u;
    u.id = idbuf;
    u.text = text;
    u.genre = genre;
    u.raw_genre = genre_name(genre);
    const std::string rel = std::string("audio/") + idbuf + ".wav";
    features::write_wav((fs::path(cfg.outdir) / rel).string(), audio);
    u.audio = rel;  // manifest-relative
    utts.push_back(std::move(u));
  }

  const std::string manifest_path = (fs::path(cfg.outdir) / cfg.manifest_name).string();
  save_manifest(manifest_path, utts);
  return manifest_path;
}

}  // namespace lyrikit::data
