// Copyright 2026 lyrikit authors
// Checkpoint container: "lyk1" magic, canonical-JSON config, named tensor
// records (64-bit little-endian floats), trailing CRC-32. Round trips are
// bit-exact.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "lyrikit/model/config.hpp"
#include "lyrikit/numeric/params.hpp"

namespace lyrikit::model {

struct Checkpoint {
  ModelConfig config;
  numeric::ParamStore params;
};

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const numeric::ParamStore& params);
Checkpoint load_checkpoint(const std::string& path);

// Elementwise arithmetic mean over checkpoints with identical configs and
// parameter names/shapes.
Checkpoint average_checkpoints(const std::vector<std::string>& paths);

uint32_t crc32(const unsigned char* data, size_t len, uint32_t seed = 0);

}  // namespace lyrikit::model
