// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Subcommands: train, render, bench, edit, pose,
// distill, gen-toy, inspect. Returns the process exit code.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spgs/train.hpp"

namespace spgs {

int run_cli(int argc, const char* const* argv);
/// Convenience for tests; args excludes the program name.
int run_cli(const std::vector<std::string>& args);

/// Applies a JSON object of training settings to cfg. Unknown keys throw.
void apply_train_config_json(const std::string& json_text, TrainConfig& cfg);

/// Distinct 8-bit color per superpoint id (a bijection on 24 bits).
std::array<std::uint8_t, 3> superpoint_color(int id);

}  // namespace spgs
