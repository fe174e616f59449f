// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cessm/model/intervention.hpp"
#include "cessm/model/native.hpp"
#include "cessm/model/sequences.hpp"
#include "cessm/obs/forward_operator.hpp"

namespace cessm::testing {

/// Expanding discs, one per episode, with a second disc appearing in odd episodes.
inline std::vector<VoltageSequence> disc_sequences(int count, int frames, int grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pos(0, grid - 1);
    std::vector<VoltageSequence> out;
    for (int e = 0; e < count; ++e) {
        VoltageSequence x(frames, grid);
        const int r0 = pos(rng), c0 = pos(rng), r1 = pos(rng), c1 = pos(rng);
        const int onset = frames / 2;
        for (int f = 0; f < frames; ++f) {
            const double rad = 1.0 + 0.6 * f;
            for (int r = 0; r < grid; ++r) {
                for (int c = 0; c < grid; ++c) {
                    bool on = std::hypot(r - r0, c - c0) <= rad;
                    if (e % 2 == 1 && f >= onset) on = on || std::hypot(r - r1, c - c1) <= 1.0 + 0.6 * (f - onset);
                    x.at(f, r, c) = on ? 1.0 : 0.0;
                }
            }
        }
        out.push_back(std::move(x));
    }
    return out;
}

struct Miniature {
    obs::ForwardOperator op;
    model::SequenceSet set;
    model::NativeConfig native;
    model::InterventionConfig intv;
};

/// N = 8, T = 6, a 2 x 2 electrode lattice and small networks.
inline Miniature miniature(int episodes = 3) {
    Miniature m;
    obs::ElectrodeLayout layout;
    layout.rows = 2;
    layout.cols = 2;
    m.op = obs::build_forward_operator(8, layout);
    const auto xs = disc_sequences(episodes, 7, 8, 99);
    m.set = model::prepare_sequences(xs, m.op.H);
    m.native.grid = 8;
    m.native.electrode_rows = 2;
    m.native.electrode_cols = 2;
    m.native.k = 3;
    m.native.d_z = 4;
    m.native.ode_hidden = 8;
    m.native.ode_layers = 2;
    m.native.steps_per_frame = 2;
    m.native.beta = 2.0;
    m.intv.d_a = 4;
    m.intv.window = 3;
    m.intv.enc_hidden = 8;
    m.intv.enc_layers = 1;
    m.intv.ode_hidden = 8;
    m.intv.ode_layers = 1;
    return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("cessm-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace cessm::testing
