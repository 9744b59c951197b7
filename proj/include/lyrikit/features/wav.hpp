// Copyright 2026 lyrikit authors
// 16-bit PCM mono WAV reading and writing.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "lyrikit/common.hpp"

namespace lyrikit::features {

struct AudioBuffer {
  std::vector<real> samples;  // in [-1, 1]
  int rate = 16000;
};

AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& audio);

}  // namespace lyrikit::features
