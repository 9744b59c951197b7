// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/features/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace lyrikit::features {

namespace {

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open wav file: " + path);
  char tag[4];
  in.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) fail("not a RIFF file: " + path);
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) fail("not a WAVE file: " + path);

  AudioBuffer audio;
  uint16_t channels = 0, bits = 0;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    uint32_t chunk_size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      uint16_t fmt = read_u16(in);
      channels = read_u16(in);
      audio.rate = static_cast<int>(read_u32(in));
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      if (fmt != 1) fail("wav is not PCM: " + path);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) fail("wav data chunk before fmt chunk: " + path);
      if (channels != 1) fail("wav must be mono: " + path);
      if (bits != 16) fail("wav must be 16-bit PCM: " + path);
      const size_t n = chunk_size / 2;
      std::vector<int16_t> raw(n);
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(chunk_size));
      if (!in) fail("truncated wav data: " + path);
      audio.samples.resize(n);
      for (size_t i = 0; i < n; ++i)
        audio.samples[i] = static_cast<real>(raw[i]) / real(32768);
      return audio;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  fail("wav has no data chunk: " + path);
}

void write_wav(const std::string& path, const AudioBuffer& audio) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write wav file: " + path);
  const uint32_t n = static_cast<uint32_t>(audio.samples.size());
  const uint32_t data_bytes = n * 2;
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(audio.rate));
  write_u32(out, static_cast<uint32_t>(audio.rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (uint32_t i = 0; i < n; ++i) {
    real s = audio.samples[i];
    if (s > 1) s = 1;
    if (s < -1) s = -1;
    auto q = static_cast<int32_t>(std::lrint(s * real(32768)));
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    write_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  if (!out) fail("failed writing wav: " + path);
}

}  // namespace lyrikit::features
