// Copyright 2026 lyrikit authors
// Command-line surface: synth, prepare, train, transcribe, score.
//
// Licensed under the Apache License, Version 2.0

#pragma once

namespace lyrikit::cli {

// Exit codes: 0 ok, 1 runtime error, 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace lyrikit::cli
