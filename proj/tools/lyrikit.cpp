// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/cli/commands.hpp"

int main(int argc, char** argv) { return lyrikit::cli::run_cli(argc, argv); }
