// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "roadgen/cli.hpp"

int main(int argc, char** argv) { return roadgen::run_cli(argc, argv); }
