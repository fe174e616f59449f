// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "cessm/fhn/dataset.hpp"
#include "cessm/obs/forward_operator.hpp"

namespace cessm::model {

/// Training view of a dataset: binarised fields x and their observations Y = H x.
struct SequenceSet {
    int grid = 0;
    int electrodes = 0;
    int frames = 0; // T + 1
    std::vector<std::vector<double>> x; // per episode, [frame][row][col] in {0, 1}
    std::vector<std::vector<double>> y; // per episode, [frame][electrode]

    int size() const { return static_cast<int>(x.size()); }
    int pixels() const { return grid * grid; }
    /// Index of the last frame.
    int horizon() const { return frames - 1; }
};

SequenceSet prepare_sequences(const fhn::Dataset& data, const obs::DenseMatrix& H);
SequenceSet prepare_sequences(std::span<const VoltageSequence> binary, const obs::DenseMatrix& H);

/// Per-episode latent states, frame-major.
struct LatentTrajectory {
    int frames = 0;
    int d_z = 0;
    int d_a = 0; // zero when no intervention state exists
    std::vector<double> z;
    std::vector<double> a;

    bool has_a() const { return d_a > 0; }
    std::span<const double> z_at(int i) const { return {z.data() + static_cast<std::size_t>(i) * d_z, std::size_t(d_z)}; }
    std::span<const double> a_at(int i) const { return {a.data() + static_cast<std::size_t>(i) * d_a, std::size_t(d_a)}; }
};

/// Output of any of the reconstruction models for one episode.
struct Reconstruction {
    VoltageSequence x_hat; // probabilities in (0, 1)
    LatentTrajectory latents;
    std::vector<double> residuals; // [frame][window][electrode]; empty for models without residuals
};

/// Thresholds probabilities at 0.5.
VoltageSequence threshold(const VoltageSequence& probabilities);

/// 2|A n B| / (|A| + |B|) of two binary frames; 1 when both are empty.
double dice(std::span<const double> a, std::span<const double> b);
/// Mean per-frame Dice of two binary sequences.
double mean_frame_dice(const VoltageSequence& a, const VoltageSequence& b);

VoltageSequence binary_sequence(const SequenceSet& set, int episode);

/// The t-th of the 8 symmetries of the square (t & 4: transpose, t & 1: flip
/// rows, t & 2: flip columns), applied to every frame.
VoltageSequence dihedral(const VoltageSequence& x, int t);

/// Episodes `ids` of `set`, where id e * 8 + t denotes episode e under symmetry t
/// when `dihedral_ids` is set. Observations are recomputed as H x.
SequenceSet select_episodes(const SequenceSet& set, std::span<const int> ids, const obs::DenseMatrix& H,
                            bool dihedral_ids);

} // namespace cessm::model
