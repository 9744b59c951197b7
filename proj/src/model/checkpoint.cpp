// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/model/checkpoint.hpp"

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace lyrikit::model {

namespace {

constexpr char kMagic[4] = {'l', 'y', 'k', '1'};

void append_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& buf, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  append_u64(buf, bits);
}

struct Reader {
  const unsigned char* p;
  size_t remaining;
  const std::string& path;

  void need(size_t n) const {
    if (remaining < n) fail("truncated checkpoint: " + path);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    p += 4;
    remaining -= 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    p += 8;
    remaining -= 8;
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    remaining -= n;
    return s;
  }
};

}  // namespace

uint32_t crc32(const unsigned char* data, size_t len, uint32_t seed) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const numeric::ParamStore& params) {
  std::string buf;
  buf.append(kMagic, 4);
  const std::string cfg_json = config.to_json();
  append_u32(buf, static_cast<uint32_t>(cfg_json.size()));
  buf += cfg_json;
  append_u64(buf, params.size());
  for (const numeric::Parameter& p : params.all()) {
    append_u32(buf, static_cast<uint32_t>(p.name.size()));
    buf += p.name;
    append_u32(buf, static_cast<uint32_t>(p.value.rank()));
    for (int64_t dim : p.value.shape()) append_u64(buf, static_cast<uint64_t>(dim));
    for (int64_t i = 0; i < p.value.numel(); ++i)
      append_f64(buf, static_cast<double>(p.value[i]));
  }
  append_u32(buf, crc32(reinterpret_cast<const unsigned char*>(buf.data()), buf.size()));

  // Atomic write: temp file in the same directory, then rename.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail("cannot write checkpoint: " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) fail("failed writing checkpoint: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 4) != 0)
    fail("not a checkpoint file: " + path);

  const size_t body = buf.size() - 4;
  uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= static_cast<uint32_t>(static_cast<unsigned char>(buf[body + static_cast<size_t>(i)]))
              << (8 * i);
  const uint32_t actual = crc32(reinterpret_cast<const unsigned char*>(buf.data()), body);
  if (stored != actual) fail("checkpoint CRC mismatch (corrupt file): " + path);

  Reader r{reinterpret_cast<const unsigned char*>(buf.data()) + 4, body - 4, path};
  Checkpoint ckpt;
  const uint32_t cfg_len = r.u32();
  ckpt.config = ModelConfig::from_json(r.bytes(cfg_len));
  const uint64_t count = r.u64();
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const uint32_t rank = r.u32();
    numeric::Shape shape;
    int64_t numel = 1;
    for (uint32_t k = 0; k < rank; ++k) {
      shape.push_back(static_cast<int64_t>(r.u64()));
      numel *= shape.back();
    }
    std::vector<real> data(static_cast<size_t>(numel));
    for (int64_t k = 0; k < numel; ++k) data[static_cast<size_t>(k)] = static_cast<real>(r.f64());
    ckpt.params.add(name, numeric::Tensor::from(std::move(shape), std::move(data)));
  }
  return ckpt;
}

Checkpoint average_checkpoints(const std::vector<std::string>& paths) {
  if (paths.empty()) fail("average_checkpoints: no paths given");
  Checkpoint mean = load_checkpoint(paths[0]);
  const std::string ref_json = mean.config.to_json();
  for (size_t i = 1; i < paths.size(); ++i) {
    Checkpoint next = load_checkpoint(paths[i]);
    if (next.config.to_json() != ref_json)
      fail("checkpoint configs differ: " + paths[0] + " vs " + paths[i]);
    if (next.params.size() != mean.params.size())
      fail("checkpoint parameter sets differ: " + paths[0] + " vs " + paths[i]);
    for (numeric::Parameter& p : mean.params.all()) {
      const numeric::Parameter& q = next.params.get(p.name);
      if (q.value.shape() != p.value.shape())
        fail("parameter " + p.name + " shape differs between " + paths[0] + " and " + paths[i]);
      for (int64_t k = 0; k < p.value.numel(); ++k) p.value[k] += q.value[k];
    }
  }
  const real inv = real(1) / static_cast<real>(paths.size());
  for (numeric::Parameter& p : mean.params.all())
    for (int64_t k = 0; k < p.value.numel(); ++k) p.value[k] *= inv;
  return mean;
}

}  // namespace lyrikit::model
