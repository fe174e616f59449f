// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Filtering ablation without an intervention state: after every F_z step the
// latent is corrected from the next few observation frames,
//   z_i = G(z_i^, Enc_y(Y_i .. Y_{i+w-1})).

#include <filesystem>

#include "cessm/model/native.hpp"

namespace cessm::model {

struct GruAblationConfig {
    int window = 3;
    int enc_hidden = 64;
    int enc_layers = 2;

    void validate() const;
    void write_header(nn::CheckpointHeader& header) const;
    static GruAblationConfig from_header(const nn::CheckpointHeader& header);
    friend bool operator==(const GruAblationConfig&, const GruAblationConfig&) = default;
};

class GruAblationNet {
public:
    GruAblationNet(const NativeConfig& native, const GruAblationConfig& config);

    const NativeNet& native() const { return native_; }
    const GruAblationConfig& config() const { return config_; }
    void declare(nn::ParamSet& params, std::mt19937_64& rng) const;

    /// y_window [B, window * M] -> [B, d_z].
    nn::Var encode_window(const nn::Binding& p, nn::Var y_window) const;
    nn::Var update(const nn::Binding& p, nn::Var z_hat, nn::Var encoded) const;

private:
    NativeNet native_;
    GruAblationConfig config_;
    nn::Mlp enc_y_;
    nn::GruCell g_z_;
};

struct GruAblationModel {
    NativeConfig native_config;
    GruAblationConfig config;
    nn::ParamSet params; // every array is trained

    static GruAblationModel create(const NativeConfig& native, const GruAblationConfig& config, std::uint64_t seed);
    /// Same architecture, with the native arrays copied from a stage-1 model (still trainable).
    static GruAblationModel warm_start(const NativeModel& native, const GruAblationConfig& config, std::uint64_t seed);
    GruAblationNet net() const { return GruAblationNet(native_config, config); }
};

struct GruGraph {
    nn::Var x_hat; // frame-major [(T + 1) * B, N * N]
    std::vector<nn::Var> z;
};

GruGraph gru_forward(const GruAblationNet& net, const nn::Binding& p, const SequenceSet& set,
                     std::span<const int> episodes);

double gru_batch_loss(const GruAblationModel& model, const SequenceSet& set, std::span<const int> episodes,
                      nn::Gradients* grads, double weight = 1.0);

/// Inference; the latent trajectories carry no intervention state.
std::vector<Reconstruction> gru_baseline_filter(const GruAblationModel& model, const SequenceSet& set,
                                                std::span<const int> episodes);

void save_gru_ablation(const std::filesystem::path& path, const GruAblationModel& model,
                       const nn::CheckpointHeader& extra = {});
GruAblationModel load_gru_ablation(const std::filesystem::path& path);

} // namespace cessm::model
