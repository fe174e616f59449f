// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Intervention model on top of a frozen native model. Per frame i:
//
//   prediction  [a_i, z_i]^ = [a, z]_{i-1} + int [F_a(a), F_z(z) + F_a(a)]
//   residual    r_i = |H Dec_z(z^h_j) - Y_j|, j = i..i+w-1, z^h an F_z-only rollout from z_{i-1}
//   update      a_i = G_a(a_i^, Enc_a(r_i)),   z_i = z_i^
//
// Native arrays are carried in the same ParamSet but frozen.

#include <filesystem>
#include <string>
#include <utility>

#include "cessm/model/native.hpp"

namespace cessm::model {

struct InterventionConfig {
    int d_a = 12;
    int window = 5; // residual frames per update
    int enc_hidden = 64;
    int enc_layers = 2;
    int ode_hidden = 64;
    int ode_layers = 2;

    /// Throws unless d_a matches the native latent size.
    void validate(const NativeConfig& native) const;
    void write_header(nn::CheckpointHeader& header) const;
    static InterventionConfig from_header(const nn::CheckpointHeader& header);
    friend bool operator==(const InterventionConfig&, const InterventionConfig&) = default;
};

class InterventionNet {
public:
    InterventionNet(const NativeConfig& native, const InterventionConfig& config);

    const NativeNet& native() const { return native_; }
    const InterventionConfig& config() const { return config_; }
    /// Declares F_a (zero final layer), Enc_a and G_a.
    void declare(nn::ParamSet& params, std::mt19937_64& rng) const;

    /// Joint RK4 over one frame interval; returns (z^, a^).
    std::pair<nn::Var, nn::Var> predict_coupled(const nn::Binding& p, nn::Var z, nn::Var a) const;
    /// F_z-only latent states for the `window` frames following z_prev.
    std::vector<nn::Var> hypothetical_latents(const nn::Binding& p, nn::Var z_prev, int window) const;
    /// Decoded hypothetical frames, window-major rows [window * B, N * N].
    nn::Var hypothetical_rollout(const nn::Binding& p, nn::Var z_prev, int window) const;
    /// residual [B, window * M] -> a_enc [B, d_a], no output activation.
    nn::Var encode_intervention(const nn::Binding& p, nn::Var residual) const;
    nn::Var update_intervention(const nn::Binding& p, nn::Var a_hat, nn::Var a_enc) const;

    const nn::OdeFunc& f_a() const { return f_a_; }

private:
    NativeNet native_;
    InterventionConfig config_;
    nn::OdeFunc f_a_;
    nn::Mlp enc_a_;
    nn::GruCell g_a_;
};

struct InterventionModel {
    NativeConfig native_config;
    InterventionConfig config;
    nn::ParamSet params; // native arrays (frozen) followed by f_a, enc_a, g_a
    std::string native_sha256; // hash of the stage-1 checkpoint file it was built from

    static InterventionModel from_native(const NativeModel& native, const InterventionConfig& config,
                                         std::uint64_t seed, std::string native_sha256 = {});
    InterventionNet net() const { return InterventionNet(native_config, config); }
    /// The frozen native part as a stand-alone model.
    NativeModel native() const;
};

/// |H x_j - Y_j| for each of `window` frames; rows beyond `x_hat.size() / (N*N)` are zero.
/// x_hat holds the available decoded frames, y the matching observation frames.
std::vector<double> residual_sequence(const obs::DenseMatrix& H, std::span<const double> x_hat,
                                      std::span<const double> y, int window);

/// Graph of one filtering pass over a batch.
struct FilterGraph {
    nn::Var x_hat; // frame-major [(T + 1) * B, N * N]
    std::vector<nn::Var> z;
    std::vector<nn::Var> a;
    std::vector<nn::Var> residual; // residual[i - 1] is the [B, window * M] input of update i
};

FilterGraph filter_forward(const InterventionNet& net, const nn::Binding& p, nn::Var H, const SequenceSet& set,
                           std::span<const int> episodes);

/// Mean intervention loss of a batch; accumulates gradients of the live arrays when `grads` is given.
double intervention_batch_loss(const InterventionModel& model, const obs::DenseMatrix& H, const SequenceSet& set,
                               std::span<const int> episodes, nn::Gradients* grads, double weight = 1.0);

/// Inference: reconstructions with z, a and the residual stacks.
std::vector<Reconstruction> filter_sequence(const InterventionModel& model, const obs::DenseMatrix& H,
                                            const SequenceSet& set, std::span<const int> episodes);

/// Stores the model and the stage-1 hash it was trained against.
void save_intervention(const std::filesystem::path& path, const InterventionModel& model,
                       const nn::CheckpointHeader& extra = {});
/// Loads a stage-2 checkpoint and verifies it against the stage-1 file at `native_path`.
InterventionModel load_intervention(const std::filesystem::path& path, const std::filesystem::path& native_path);

} // namespace cessm::model
