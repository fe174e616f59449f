// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "cessm/nn/params.hpp"

namespace cessm::nn {

/// Architecture hyperparameters and bookkeeping stored next to the arrays.
using CheckpointHeader = std::map<std::string, std::string>;

/// Encodes the arrays (as f32, declaration order) plus header attributes.
std::string encode_checkpoint(const ParamSet& params, const CheckpointHeader& header);
/// Decodes a checkpoint; array values are widened from f32.
ParamSet decode_checkpoint(const std::string& bytes, CheckpointHeader* header = nullptr);

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, const CheckpointHeader& header);
ParamSet load_checkpoint(const std::filesystem::path& path, CheckpointHeader* header = nullptr);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);
/// Typed header lookups; throw FormatError when the key is missing or malformed.
int header_int(const CheckpointHeader& header, const std::string& key);
double header_double(const CheckpointHeader& header, const std::string& key);

/// Rounds every value to the nearest f32, matching what a save/load cycle produces.
void round_to_f32(ParamSet& params);

} // namespace cessm::nn
