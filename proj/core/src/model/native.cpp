// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/model/native.hpp"

#include "cessm/errors.hpp"
#include "cessm/nn/ode.hpp"
#include "cessm/nn/ops.hpp"

namespace cessm::model {

using nn::Var;

namespace {

constexpr int kEncChannels[] = {16, 32, 32};
constexpr int kDecChannels[] = {16, 16, 8, 1};

int conv_out(int n) { return (n + 2 - 3) / 2 + 1; }

} // namespace

void NativeConfig::validate() const {
    if (grid < 8 || grid % 8 != 0) throw PreconditionError("native model: grid must be a positive multiple of 8");
    if (electrode_rows < 1 || electrode_cols < 1 || electrodes() < 4) {
        throw PreconditionError("native model: need at least 4 electrodes");
    }
    if (k < 1) throw PreconditionError("native model: k must be >= 1");
    if (d_z < 1 || ode_hidden < 1 || ode_layers < 1) throw PreconditionError("native model: bad latent sizes");
    if (steps_per_frame < 1) throw PreconditionError("native model: steps_per_frame must be >= 1");
    if (!(beta >= 0.0)) throw PreconditionError("native model: beta must be >= 0");
}

void NativeConfig::write_header(nn::CheckpointHeader& h) const {
    h["native.grid"] = std::to_string(grid);
    h["native.electrode_rows"] = std::to_string(electrode_rows);
    h["native.electrode_cols"] = std::to_string(electrode_cols);
    h["native.k"] = std::to_string(k);
    h["native.d_z"] = std::to_string(d_z);
    h["native.ode_hidden"] = std::to_string(ode_hidden);
    h["native.ode_layers"] = std::to_string(ode_layers);
    h["native.steps_per_frame"] = std::to_string(steps_per_frame);
    h["native.beta"] = nn::format_double(beta);
}

NativeConfig NativeConfig::from_header(const nn::CheckpointHeader& h) {
    NativeConfig c;
    c.grid = nn::header_int(h, "native.grid");
    c.electrode_rows = nn::header_int(h, "native.electrode_rows");
    c.electrode_cols = nn::header_int(h, "native.electrode_cols");
    c.k = nn::header_int(h, "native.k");
    c.d_z = nn::header_int(h, "native.d_z");
    c.ode_hidden = nn::header_int(h, "native.ode_hidden");
    c.ode_layers = nn::header_int(h, "native.ode_layers");
    c.steps_per_frame = nn::header_int(h, "native.steps_per_frame");
    c.beta = nn::header_double(h, "native.beta");
    c.validate();
    return c;
}

NativeNet::NativeNet(const NativeConfig& config) : config_(config) {
    config_.validate();
    int channels = config_.k;
    int rows = config_.electrode_rows;
    int cols = config_.electrode_cols;
    for (int i = 0; i < 3; ++i) {
        enc_convs_.push_back(nn::Conv2d{"enc_z.conv" + std::to_string(i), channels, kEncChannels[i], 3, 2, 1});
        channels = kEncChannels[i];
        rows = conv_out(rows);
        cols = conv_out(cols);
    }
    enc_flat_ = channels * rows * cols;
    enc_out_ = nn::Dense{"enc_z.out", enc_flat_, config_.d_z};
    f_z_ = nn::OdeFunc::make("f_z", config_.d_z, config_.ode_hidden, config_.ode_layers);
    dec_base_ = config_.grid / 8;
    dec_in_ = nn::Dense{"dec_z.in", config_.d_z, kDecChannels[0] * dec_base_ * dec_base_};
    for (int i = 0; i < 3; ++i) {
        dec_ups_.push_back(
            nn::ConvTranspose2d{"dec_z.up" + std::to_string(i), kDecChannels[i], kDecChannels[i + 1], 4, 2, 1});
    }
}

void NativeNet::declare(nn::ParamSet& params, std::mt19937_64& rng) const {
    for (const auto& c : enc_convs_) c.declare(params, rng);
    enc_out_.declare(params, rng);
    f_z_.declare(params, rng);
    dec_in_.declare(params, rng);
    for (const auto& u : dec_ups_) u.declare(params, rng);
}

Var NativeNet::encode(const nn::Binding& p, Var y_window) const {
    const int B = y_window.rows();
    if (y_window.size() != B * config_.k * config_.electrodes()) {
        throw ShapeError("encode: expected " + std::to_string(config_.k) + " observation frames per episode, got " +
                         nn::shape_string(y_window.shape()));
    }
    Var h = nn::reshape(y_window, {B, config_.k, config_.electrode_rows, config_.electrode_cols});
    for (const auto& c : enc_convs_) h = nn::elu(c(p, h));
    return enc_out_(p, nn::reshape(h, {B, enc_flat_}));
}

Var NativeNet::step(const nn::Binding& p, Var z) const {
    return nn::rk4_integrate([&](Var s) { return f_z_(p, s); }, z, 0.0, 1.0, config_.steps_per_frame);
}

std::vector<Var> NativeNet::rollout(const nn::Binding& p, Var z0, int horizon) const {
    if (horizon < 1) throw PreconditionError("rollout: horizon must be >= 1");
    std::vector<Var> zs{z0};
    zs.reserve(static_cast<std::size_t>(horizon) + 1);
    for (int i = 1; i <= horizon; ++i) zs.push_back(step(p, zs.back()));
    return zs;
}

Var NativeNet::decode(const nn::Binding& p, Var z) const {
    const int R = z.rows();
    Var h = nn::elu(dec_in_(p, z));
    h = nn::reshape(h, {R, kDecChannels[0], dec_base_, dec_base_});
    for (std::size_t i = 0; i < dec_ups_.size(); ++i) {
        h = dec_ups_[i](p, h);
        h = i + 1 < dec_ups_.size() ? nn::elu(h) : nn::sigmoid(h);
    }
    return nn::reshape(h, {R, config_.grid * config_.grid});
}

NativeModel NativeModel::create(const NativeConfig& config, std::uint64_t seed) {
    NativeModel m;
    m.config = config;
    std::mt19937_64 rng(seed);
    NativeNet(config).declare(m.params, rng);
    return m;
}

std::vector<double> observation_window(const SequenceSet& set, std::span<const int> episodes, int start, int length) {
    const int M = set.electrodes;
    std::vector<double> out(episodes.size() * static_cast<std::size_t>(length) * M, 0.0);
    for (std::size_t b = 0; b < episodes.size(); ++b) {
        const auto& y = set.y.at(static_cast<std::size_t>(episodes[b]));
        for (int j = 0; j < length; ++j) {
            const int f = start + j;
            if (f < 0 || f >= set.frames) continue;
            std::copy_n(y.begin() + static_cast<long>(f) * M, M,
                        out.begin() + (static_cast<long>(b) * length + j) * M);
        }
    }
    return out;
}

std::vector<double> frame_major_targets(const SequenceSet& set, std::span<const int> episodes) {
    const int P = set.pixels();
    const auto B = static_cast<long>(episodes.size());
    std::vector<double> out(static_cast<std::size_t>(B) * set.frames * P);
    for (int f = 0; f < set.frames; ++f) {
        for (long b = 0; b < B; ++b) {
            const auto& x = set.x.at(static_cast<std::size_t>(episodes[static_cast<std::size_t>(b)]));
            std::copy_n(x.begin() + static_cast<long>(f) * P, P, out.begin() + (f * B + b) * P);
        }
    }
    return out;
}

Var loss_native(Var pred, std::span<const double> target, int batch, int frames, double beta) {
    if (frames < 2) throw PreconditionError("loss_native: need at least two frames");
    if (pred.rows() != batch * frames) throw ShapeError("loss_native: prediction rows != batch * frames");
    Var per_frame = nn::bce_rows(pred, target);
    std::vector<double> w(static_cast<std::size_t>(batch) * frames);
    const int T = frames - 1;
    for (int f = 0; f < frames; ++f) {
        for (int b = 0; b < batch; ++b) {
            w[static_cast<std::size_t>(f) * batch + b] = (f == 0 ? beta : 1.0 / T) / batch;
        }
    }
    return nn::weighted_sum(per_frame, w);
}

Var loss_intv(Var pred, std::span<const double> target, int batch, int frames) {
    if (pred.rows() != batch * frames) throw ShapeError("loss_intv: prediction rows != batch * frames");
    return nn::mean(nn::bce_rows(pred, target));
}

Var native_forward(const NativeNet& net, const nn::Binding& p, const SequenceSet& set, std::span<const int> episodes,
                   std::vector<Var>* latents) {
    const int B = static_cast<int>(episodes.size());
    const int k = net.config().k;
    if (set.frames < k) throw PreconditionError("native model: sequence shorter than k");
    auto& tape = p.tape();
    Var yw = tape.constant({B, k * set.electrodes}, observation_window(set, episodes, 0, k), "y_window");
    Var z0 = net.encode(p, yw);
    auto zs = net.rollout(p, z0, set.horizon());
    Var stacked = nn::concat_rows(zs);
    if (latents) *latents = zs;
    return net.decode(p, stacked);
}

double native_batch_loss(const NativeModel& model, const SequenceSet& set, std::span<const int> episodes,
                         nn::Gradients* grads, double weight) {
    nn::Tape tape;
    nn::Binding p(tape, model.params, grads ? nn::GradMode::trainable_only : nn::GradMode::none);
    const NativeNet net = model.net();
    Var pred = native_forward(net, p, set, episodes);
    const auto target = frame_major_targets(set, episodes);
    Var loss = loss_native(pred, target, static_cast<int>(episodes.size()), set.frames, model.config.beta);
    if (grads) {
        tape.backward(loss);
        nn::add_into(*grads, p.gradients(), weight);
    }
    return loss.item();
}

std::vector<Reconstruction> split_frame_major(std::span<const double> values, int batch, int frames, int grid) {
    const long P = static_cast<long>(grid) * grid;
    std::vector<Reconstruction> out(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        auto& seq = out[static_cast<std::size_t>(b)].x_hat;
        seq = VoltageSequence(frames, grid);
        for (int f = 0; f < frames; ++f) {
            std::copy_n(values.begin() + (static_cast<long>(f) * batch + b) * P, P, seq.frame(f).begin());
        }
    }
    return out;
}

std::vector<Reconstruction> native_reconstruct(const NativeModel& model, const SequenceSet& set,
                                               std::span<const int> episodes) {
    nn::Tape tape;
    nn::Binding p(tape, model.params, nn::GradMode::none);
    const NativeNet net = model.net();
    std::vector<Var> zs;
    Var pred = native_forward(net, p, set, episodes, &zs);
    const int B = static_cast<int>(episodes.size());
    auto out = split_frame_major(pred.value(), B, set.frames, set.grid);
    const int d = model.config.d_z;
    for (int b = 0; b < B; ++b) {
        auto& lt = out[static_cast<std::size_t>(b)].latents;
        lt.frames = set.frames;
        lt.d_z = d;
        for (const auto& z : zs) {
            const auto v = z.value();
            lt.z.insert(lt.z.end(), v.begin() + static_cast<long>(b) * d, v.begin() + static_cast<long>(b + 1) * d);
        }
    }
    return out;
}

void save_native(const std::filesystem::path& path, const NativeModel& model, const nn::CheckpointHeader& extra) {
    nn::CheckpointHeader h = extra;
    h["model"] = "native";
    model.config.write_header(h);
    nn::save_checkpoint(path, model.params, h);
}

NativeModel load_native(const std::filesystem::path& path) {
    nn::CheckpointHeader h;
    NativeModel m;
    m.params = nn::load_checkpoint(path, &h);
    if (h["model"] != "native") throw FormatError(path.string() + ": not a native-model checkpoint");
    m.config = NativeConfig::from_header(h);
    // Reject checkpoints whose arrays do not match the declared architecture.
    const auto fresh = NativeModel::create(m.config, 0);
    if (fresh.params.size() != m.params.size()) throw FormatError(path.string() + ": architecture mismatch");
    for (std::size_t i = 0; i < fresh.params.size(); ++i) {
        const auto& a = fresh.params.arrays()[i];
        const auto& b = m.params.arrays()[i];
        if (a.name != b.name || a.shape != b.shape) {
            throw FormatError(path.string() + ": array '" + b.name + "' does not match the architecture");
        }
    }
    return m;
}

} // namespace cessm::model
