// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/features/frontend.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace lyrikit::features {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Iterative radix-2 FFT, n a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<double> hann_window() {
  std::vector<double> w(kWinLen);
  for (int i = 0; i < kWinLen; ++i)
    w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2 * kPi * i / kWinLen);
  return w;
}

// Triangle filter weights over FFT bins 0..kNfft/2, built once per n_mels.
struct MelBank {
  std::vector<std::vector<double>> weights;  // n_mels x (nfft/2+1)
  std::vector<double> centers_hz;
};

MelBank build_mel_bank(int n_mels) {
  const int nbins = kNfft / 2 + 1;
  const double f_lo = 0.0, f_hi = kSampleRate / 2.0;
  const double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[static_cast<size_t>(i)] = mel_to_hz(m_lo + (m_hi - m_lo) * i / (n_mels + 1));
  MelBank bank;
  bank.weights.assign(static_cast<size_t>(n_mels), std::vector<double>(static_cast<size_t>(nbins), 0.0));
  bank.centers_hz.resize(static_cast<size_t>(n_mels));
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[static_cast<size_t>(m)];
    const double center = edges[static_cast<size_t>(m) + 1];
    const double right = edges[static_cast<size_t>(m) + 2];
    bank.centers_hz[static_cast<size_t>(m)] = center;
    for (int b = 0; b < nbins; ++b) {
      const double f = static_cast<double>(b) * kSampleRate / kNfft;
      double w = 0;
      if (f > left && f < right)
        w = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
      bank.weights[static_cast<size_t>(m)][static_cast<size_t>(b)] = w;
    }
  }
  return bank;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_freqs(int n_mels) { return build_mel_bank(n_mels).centers_hz; }

int64_t num_frames(int64_t nsamples) {
  if (nsamples < kWinLen) return 0;
  return 1 + (nsamples - kWinLen) / kHop;
}

numeric::Tensor compute_fbank(const AudioBuffer& audio, int n_mels) {
  if (audio.rate != kSampleRate)
    fail("compute_fbank expects " + std::to_string(kSampleRate) + " Hz audio, got " +
         std::to_string(audio.rate));
  const int64_t t = num_frames(static_cast<int64_t>(audio.samples.size()));
  if (t == 0) return numeric::Tensor();
  static const std::vector<double> window = hann_window();
  const MelBank bank = build_mel_bank(n_mels);
  const int nbins = kNfft / 2 + 1;

  numeric::Tensor out({t, n_mels});
  std::vector<std::complex<double>> buf(kNfft);
  std::vector<double> mag(static_cast<size_t>(nbins));
  for (int64_t fr = 0; fr < t; ++fr) {
    const real* x = audio.samples.data() + fr * kHop;
    for (int i = 0; i < kNfft; ++i)
      buf[static_cast<size_t>(i)] =
          i < kWinLen ? std::complex<double>(static_cast<double>(x[i]) * window[static_cast<size_t>(i)], 0.0)
                      : std::complex<double>(0.0, 0.0);
    fft_inplace(buf);
    for (int b = 0; b < nbins; ++b) mag[static_cast<size_t>(b)] = std::abs(buf[static_cast<size_t>(b)]);
    for (int m = 0; m < n_mels; ++m) {
      double acc = 0;
      const auto& w = bank.weights[static_cast<size_t>(m)];
      for (int b = 0; b < nbins; ++b) acc += w[static_cast<size_t>(b)] * mag[static_cast<size_t>(b)];
      out.at(fr, m) = static_cast<real>(std::log(std::max(acc, kLogFloor)));
    }
  }
  return out;
}

numeric::Tensor compute_pitch(const AudioBuffer& audio) {
  if (audio.rate != kSampleRate)
    fail("compute_pitch expects " + std::to_string(kSampleRate) + " Hz audio, got " +
         std::to_string(audio.rate));
  const int64_t t = num_frames(static_cast<int64_t>(audio.samples.size()));
  if (t == 0) return numeric::Tensor();
  const int lag_min = kSampleRate / 400;  // 40
  const int lag_max = kSampleRate / 60;   // 266

  numeric::Tensor out({t, 3});
  std::vector<double> corr(static_cast<size_t>(lag_max - lag_min) + 1);
  double prev_logp = 0;
  bool prev_voiced = false;
  for (int64_t fr = 0; fr < t; ++fr) {
    const real* x = audio.samples.data() + fr * kHop;
    double best_r = 0;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      double num = 0, e0 = 0, e1 = 0;
      const int n = kWinLen - lag;
      for (int i = 0; i < n; ++i) {
        const double a = x[i], b = x[i + lag];
        num += a * b;
        e0 += a * a;
        e1 += b * b;
      }
      const double denom = std::sqrt(e0 * e1);
      const double r = denom > 0 ? num / denom : 0.0;
      corr[static_cast<size_t>(lag - lag_min)] = r;
      if (r > best_r) best_r = r;
    }
    // A periodic signal peaks equally at every lag multiple; take the
    // smallest lag near the maximum so multiples do not halve the pitch.
    int best_lag = 0;
    for (int lag = lag_min; lag <= lag_max; ++lag)
      if (corr[static_cast<size_t>(lag - lag_min)] >= best_r - 0.01) {
        best_lag = lag;
        break;
      }
    const bool voiced = best_r >= kVoicingThreshold && best_lag > 0;
    double logp = 0, delta = 0;
    if (voiced) {
      const double f0 = static_cast<double>(kSampleRate) / best_lag;
      logp = std::log2(f0 / 100.0);
      if (prev_voiced) delta = logp - prev_logp;
    }
    out.at(fr, 0) = static_cast<real>(best_r);
    out.at(fr, 1) = static_cast<real>(logp);
    out.at(fr, 2) = static_cast<real>(delta);
    prev_logp = logp;
    prev_voiced = voiced;
  }
  return out;
}

FeatureMatrix compute_features(const AudioBuffer& audio) {
  FeatureMatrix fm;
  const int64_t t = num_frames(static_cast<int64_t>(audio.samples.size()));
  if (t == 0) {
    fm.too_short = true;
    return fm;
  }
  numeric::Tensor fbank = compute_fbank(audio);
  numeric::Tensor pitch = compute_pitch(audio);
  fm.frames = numeric::Tensor({t, kFeatDim});
  for (int64_t fr = 0; fr < t; ++fr) {
    for (int m = 0; m < kNumMels; ++m) fm.frames.at(fr, m) = fbank.at(fr, m);
    for (int p = 0; p < 3; ++p) fm.frames.at(fr, kNumMels + p) = pitch.at(fr, p);
  }
  return fm;
}

void CmvnAccumulator::add(const numeric::Tensor& feats) {
  if (feats.empty()) return;
  const int64_t t = feats.dim(0), d = feats.dim(1);
  if (sum_.empty()) {
    sum_.assign(static_cast<size_t>(d), 0.0);
    sum_sq_.assign(static_cast<size_t>(d), 0.0);
  }
  if (static_cast<int64_t>(sum_.size()) != d)
    fail("cmvn: feature dim changed from " + std::to_string(sum_.size()) + " to " +
         std::to_string(d));
  for (int64_t fr = 0; fr < t; ++fr)
    for (int64_t k = 0; k < d; ++k) {
      const double v = feats.at(fr, k);
      sum_[static_cast<size_t>(k)] += v;
      sum_sq_[static_cast<size_t>(k)] += v * v;
    }
  frames_ += t;
}

CmvnStats CmvnAccumulator::finalize() const {
  if (frames_ == 0) fail("cmvn: no frames accumulated");
  CmvnStats s;
  s.frames = frames_;
  s.mean.resize(sum_.size());
  s.var.resize(sum_.size());
  for (size_t k = 0; k < sum_.size(); ++k) {
    s.mean[k] = sum_[k] / static_cast<double>(frames_);
    s.var[k] = std::max(0.0, sum_sq_[k] / static_cast<double>(frames_) - s.mean[k] * s.mean[k]);
  }
  return s;
}

numeric::Tensor apply_cmvn(const numeric::Tensor& feats, const CmvnStats& stats) {
  if (feats.empty()) return feats;
  const int64_t t = feats.dim(0), d = feats.dim(1);
  if (static_cast<int64_t>(stats.mean.size()) != d)
    fail("cmvn: stats dim " + std::to_string(stats.mean.size()) + " != feature dim " +
         std::to_string(d));
  numeric::Tensor out({t, d});
  std::vector<double> inv_std(static_cast<size_t>(d));
  for (int64_t k = 0; k < d; ++k)
    inv_std[static_cast<size_t>(k)] = 1.0 / std::sqrt(stats.var[static_cast<size_t>(k)] + 1e-10);
  for (int64_t fr = 0; fr < t; ++fr)
    for (int64_t k = 0; k < d; ++k)
      out.at(fr, k) = static_cast<real>(
          (feats.at(fr, k) - stats.mean[static_cast<size_t>(k)]) * inv_std[static_cast<size_t>(k)]);
  return out;
}

void save_cmvn(const std::string& path, const CmvnStats& stats) {
  nlohmann::json j;
  j["frames"] = stats.frames;
  j["mean"] = stats.mean;
  j["var"] = stats.var;
  std::ofstream out(path);
  if (!out) fail("cannot write cmvn stats: " + path);
  out << j.dump(2) << "\n";
}

CmvnStats load_cmvn(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read cmvn stats: " + path);
  nlohmann::json j;
  in >> j;
  CmvnStats s;
  s.frames = j.at("frames").get<int64_t>();
  s.mean = j.at("mean").get<std::vector<double>>();
  s.var = j.at("var").get<std::vector<double>>();
  return s;
}

void write_feature_cache(const std::string& path, const numeric::Tensor& feats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write feature cache: " + path);
  const uint32_t t = feats.empty() ? 0 : static_cast<uint32_t>(feats.dim(0));
  const uint32_t d = feats.empty() ? kFeatDim : static_cast<uint32_t>(feats.dim(1));
  auto put_u32 = [&out](uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
  };
  put_u32(t);
  put_u32(d);
  for (int64_t i = 0; i < feats.numel(); ++i) {
    const float f = static_cast<float>(feats[i]);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  }
  if (!out) fail("failed writing feature cache: " + path);
}

numeric::Tensor read_feature_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read feature cache: " + path);
  auto get_u32 = [&in, &path]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) fail("truncated feature cache: " + path);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  };
  const uint32_t t = get_u32();
  const uint32_t d = get_u32();
  if (t == 0) return numeric::Tensor();
  numeric::Tensor out({static_cast<int64_t>(t), static_cast<int64_t>(d)});
  for (int64_t i = 0; i < out.numel(); ++i) {
    const uint32_t bits = get_u32();
    float f;
    std::memcpy(&f, &bits, 4);
    out[i] = static_cast<real>(f);
  }
  return out;
}

}  // namespace lyrikit::features
