// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/eval/render.hpp"

#include <algorithm>
#include <cmath>

#include "cessm/errors.hpp"
#include "cessm/io/container.hpp"

namespace cessm::eval {

GrayImage render_panels(const std::vector<LabeledSequence>& sequences, int stride) {
    if (sequences.empty()) throw PreconditionError("render_panels: nothing to render");
    if (stride < 1) throw PreconditionError("render_panels: stride must be >= 1");
    const int frames = sequences.front().second.frames;
    const int N = sequences.front().second.grid;
    for (const auto& [label, seq] : sequences) {
        if (seq.frames != frames || seq.grid != N) {
            throw PreconditionError("render_panels: sequence '" + label + "' has a different frame count or grid");
        }
    }
    GrayImage img;
    img.tile_rows = static_cast<int>(sequences.size());
    img.tile_cols = (frames + stride - 1) / stride;
    img.width = img.tile_cols * N;
    img.height = img.tile_rows * N;
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
    for (int tr = 0; tr < img.tile_rows; ++tr) {
        const auto& seq = sequences[static_cast<std::size_t>(tr)].second;
        img.row_labels.push_back(sequences[static_cast<std::size_t>(tr)].first);
        for (int tc = 0; tc < img.tile_cols; ++tc) {
            const int f = tc * stride;
            for (int r = 0; r < N; ++r) {
                for (int c = 0; c < N; ++c) {
                    const double v = std::clamp(seq.at(f, r, c), 0.0, 1.0);
                    const auto px = static_cast<std::uint8_t>(std::lround(v * 255.0));
                    img.pixels[static_cast<std::size_t>(tr * N + r) * img.width + tc * N + c] = px;
                }
            }
        }
    }
    return img;
}

std::string encode_pgm(const GrayImage& image) {
    std::string out = "P5\n";
    for (std::size_t i = 0; i < image.row_labels.size(); ++i) {
        out += "# row " + std::to_string(i) + ": " + image.row_labels[i] + "\n";
    }
    out += std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    io::write_bytes_new(path, encode_pgm(image));
}

} // namespace cessm::eval
