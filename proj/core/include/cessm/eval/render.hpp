// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cessm/sequence.hpp"

namespace cessm::eval {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // row-major
    std::vector<std::string> row_labels;
    int tile_rows = 0;
    int tile_cols = 0;
};

using LabeledSequence = std::pair<std::string, VoltageSequence>;

/// One tile row per sequence, one tile column per frame 0, stride, 2*stride, ...;
/// values clamped to [0, 1] and mapped 0 -> black, 1 -> white.
GrayImage render_panels(const std::vector<LabeledSequence>& sequences, int stride);

/// Binary PGM (P5); row labels go into a header comment.
std::string encode_pgm(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

} // namespace cessm::eval
