// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Native-dynamics model: z_0 = Enc_z(Y_0..Y_{k-1}), z_i = z_{i-1} + int F_z,
// x_i = Dec_z(z_i). Every method works on a batch of episodes stacked along
// the leading dimension.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cessm/model/sequences.hpp"
#include "cessm/nn/checkpoint.hpp"
#include "cessm/nn/layers.hpp"

namespace cessm::model {

struct NativeConfig {
    int grid = 32;
    int electrode_rows = 8;
    int electrode_cols = 8;
    int k = 5;    // observation frames fed to the initial-state encoder
    int d_z = 12;
    int ode_hidden = 64;
    int ode_layers = 2;
    int steps_per_frame = 4;
    double beta = 5.0;

    int electrodes() const { return electrode_rows * electrode_cols; }
    void validate() const;
    void write_header(nn::CheckpointHeader& header) const;
    static NativeConfig from_header(const nn::CheckpointHeader& header);
    friend bool operator==(const NativeConfig&, const NativeConfig&) = default;
};

class NativeNet {
public:
    explicit NativeNet(const NativeConfig& config);

    const NativeConfig& config() const { return config_; }
    void declare(nn::ParamSet& params, std::mt19937_64& rng) const;

    /// y_window [B, k * M] (frame-major per episode) -> z_0 [B, d_z].
    nn::Var encode(const nn::Binding& p, nn::Var y_window) const;
    nn::Var field(const nn::Binding& p, nn::Var z) const { return f_z_(p, z); }
    /// Advances z by one frame interval with RK4.
    nn::Var step(const nn::Binding& p, nn::Var z) const;
    /// z_0..z_T.
    std::vector<nn::Var> rollout(const nn::Binding& p, nn::Var z0, int horizon) const;
    /// z [R, d_z] -> probabilities [R, N * N].
    nn::Var decode(const nn::Binding& p, nn::Var z) const;

    const nn::OdeFunc& f_z() const { return f_z_; }

private:
    NativeConfig config_;
    std::vector<nn::Conv2d> enc_convs_;
    nn::Dense enc_out_;
    nn::OdeFunc f_z_;
    nn::Dense dec_in_;
    std::vector<nn::ConvTranspose2d> dec_ups_;
    int enc_flat_ = 0;
    int dec_base_ = 0;
};

struct NativeModel {
    NativeConfig config;
    nn::ParamSet params;

    static NativeModel create(const NativeConfig& config, std::uint64_t seed);
    NativeNet net() const { return NativeNet(config); }
};

/// Observation frames [start, start + length) of the given episodes as a
/// [B, length * M] block; frames past the end are zero.
std::vector<double> observation_window(const SequenceSet& set, std::span<const int> episodes, int start, int length);
/// Binary targets of all frames, frame-major: row (i * B + b) is frame i of episode b.
std::vector<double> frame_major_targets(const SequenceSet& set, std::span<const int> episodes);

/// beta * BCE(frame 0) + mean over frames 1..T of BCE(frame i), averaged over
/// the batch. `pred` holds frame-major rows [(T + 1) * B, N * N].
nn::Var loss_native(nn::Var pred, std::span<const double> target, int batch, int frames, double beta);
/// Mean BCE over every frame of every episode.
nn::Var loss_intv(nn::Var pred, std::span<const double> target, int batch, int frames);

/// Frame-major probabilities of the native reconstruction, built on `p`'s tape.
nn::Var native_forward(const NativeNet& net, const nn::Binding& p, const SequenceSet& set,
                       std::span<const int> episodes, std::vector<nn::Var>* latents = nullptr);

/// Mean native loss of a batch; accumulates gradients (scaled by `weight`) when `grads` is given.
double native_batch_loss(const NativeModel& model, const SequenceSet& set, std::span<const int> episodes,
                         nn::Gradients* grads, double weight = 1.0);

/// Inference-only reconstructions. Only Y_0..Y_{k-1} of each episode is read.
std::vector<Reconstruction> native_reconstruct(const NativeModel& model, const SequenceSet& set,
                                               std::span<const int> episodes);

void save_native(const std::filesystem::path& path, const NativeModel& model, const nn::CheckpointHeader& extra = {});
NativeModel load_native(const std::filesystem::path& path);

/// Splits a batch of frame-major rows into per-episode sequences.
std::vector<Reconstruction> split_frame_major(std::span<const double> values, int batch, int frames, int grid);

} // namespace cessm::model
