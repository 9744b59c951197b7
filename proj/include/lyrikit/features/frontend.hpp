// Copyright 2026 lyrikit authors
// Acoustic frontend: 80-dim log-mel filterbank plus 3 pitch features per
// 10 ms frame, corpus-level mean/variance normalization, and a binary
// per-utterance feature cache.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "lyrikit/features/wav.hpp"
#include "lyrikit/numeric/tensor.hpp"

namespace lyrikit::features {

inline constexpr int kSampleRate = 16000;
inline constexpr int kFrameLenMs = 25;
inline constexpr int kFrameShiftMs = 10;
inline constexpr int kWinLen = 400;  // 25 ms at 16 kHz
inline constexpr int kHop = 160;     // 10 ms at 16 kHz
inline constexpr int kNfft = 512;
inline constexpr int kNumMels = 80;
inline constexpr int kFeatDim = 83;  // 80 mel + voicing + log-pitch + delta
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kVoicingThreshold = 0.3;

struct FeatureMatrix {
  numeric::Tensor frames;  // T x 83
  bool too_short = false;  // input shorter than one window, frames is empty
};

// 1 + floor((n - win) / hop) for n >= win, else 0.
int64_t num_frames(int64_t nsamples);

// Hann window -> 512-point magnitude FFT -> 80 mel triangles over 0..8 kHz
// -> natural log with floor 1e-10. Requires rate 16000.
numeric::Tensor compute_fbank(const AudioBuffer& audio, int n_mels = kNumMels);

// Per frame: [normalized autocorrelation peak, log2(f0/100), delta log-pitch].
// Peak searched over lags for 60..400 Hz; frames with peak < 0.3 are unvoiced
// and emit [peak, 0, 0].
numeric::Tensor compute_pitch(const AudioBuffer& audio);

// fbank and pitch concatenated to T x 83.
FeatureMatrix compute_features(const AudioBuffer& audio);

// HTK-style mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Center frequency (Hz) of each mel triangle, for filterbank geometry checks.
std::vector<double> mel_center_freqs(int n_mels = kNumMels);

struct CmvnStats {
  std::vector<double> mean;  // per dim
  std::vector<double> var;   // population variance per dim
  int64_t frames = 0;
};

class CmvnAccumulator {
 public:
  void add(const numeric::Tensor& feats);  // T x D
  CmvnStats finalize() const;

 private:
  std::vector<double> sum_, sum_sq_;
  int64_t frames_ = 0;
};

// (x - mean) / sqrt(var + 1e-10), per dimension. Not an involution: applying
// twice with the same stats shifts by -mean/sqrt(var) again.
numeric::Tensor apply_cmvn(const numeric::Tensor& feats, const CmvnStats& stats);

void save_cmvn(const std::string& path, const CmvnStats& stats);
CmvnStats load_cmvn(const std::string& path);

// Cache file layout: u32 T, u32 D (little endian), then T*D float32 LE.
void write_feature_cache(const std::string& path, const numeric::Tensor& feats);
numeric::Tensor read_feature_cache(const std::string& path);

}  // namespace lyrikit::features
