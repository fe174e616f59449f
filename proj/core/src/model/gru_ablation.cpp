// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/model/gru_ablation.hpp"

#include "cessm/errors.hpp"
#include "cessm/nn/ops.hpp"

namespace cessm::model {

using nn::Var;

void GruAblationConfig::validate() const {
    if (window < 1) throw PreconditionError("gru ablation: window must be >= 1");
    if (enc_hidden < 1 || enc_layers < 1) throw PreconditionError("gru ablation: bad encoder sizes");
}

void GruAblationConfig::write_header(nn::CheckpointHeader& h) const {
    h["gru.window"] = std::to_string(window);
    h["gru.enc_hidden"] = std::to_string(enc_hidden);
    h["gru.enc_layers"] = std::to_string(enc_layers);
}

GruAblationConfig GruAblationConfig::from_header(const nn::CheckpointHeader& h) {
    GruAblationConfig c;
    c.window = nn::header_int(h, "gru.window");
    c.enc_hidden = nn::header_int(h, "gru.enc_hidden");
    c.enc_layers = nn::header_int(h, "gru.enc_layers");
    c.validate();
    return c;
}

GruAblationNet::GruAblationNet(const NativeConfig& native, const GruAblationConfig& config)
    : native_(native), config_(config) {
    config_.validate();
    enc_y_.name = "enc_y";
    enc_y_.widths.push_back(config_.window * native.electrodes());
    for (int i = 0; i < config_.enc_layers; ++i) enc_y_.widths.push_back(config_.enc_hidden);
    enc_y_.widths.push_back(native.d_z);
    g_z_ = nn::GruCell{"g_z", native.d_z, native.d_z};
}

void GruAblationNet::declare(nn::ParamSet& params, std::mt19937_64& rng) const {
    native_.declare(params, rng);
    enc_y_.declare(params, rng);
    g_z_.declare(params, rng);
}

Var GruAblationNet::encode_window(const nn::Binding& p, Var y_window) const {
    if (y_window.size() != y_window.rows() * enc_y_.input_dim()) {
        throw ShapeError("gru ablation: observation window has shape " + nn::shape_string(y_window.shape()));
    }
    return enc_y_(p, y_window);
}

Var GruAblationNet::update(const nn::Binding& p, Var z_hat, Var encoded) const { return g_z_(p, z_hat, encoded); }

GruAblationModel GruAblationModel::create(const NativeConfig& native, const GruAblationConfig& config,
                                          std::uint64_t seed) {
    GruAblationModel m;
    m.native_config = native;
    m.config = config;
    std::mt19937_64 rng(seed);
    GruAblationNet(native, config).declare(m.params, rng);
    return m;
}

GruAblationModel GruAblationModel::warm_start(const NativeModel& native, const GruAblationConfig& config,
                                              std::uint64_t seed) {
    auto m = create(native.config, config, seed);
    for (const auto& a : native.params.arrays()) m.params.at(a.name).values = a.values;
    return m;
}

GruGraph gru_forward(const GruAblationNet& net, const nn::Binding& p, const SequenceSet& set,
                     std::span<const int> episodes) {
    const NativeNet& native = net.native();
    const int B = static_cast<int>(episodes.size());
    const int k = native.config().k;
    const int w = net.config().window;
    const int M = set.electrodes;
    if (set.frames < k) throw PreconditionError("gru ablation: sequence shorter than k");
    auto& tape = p.tape();
    GruGraph g;
    Var z = native.encode(p, tape.constant({B, k * M}, observation_window(set, episodes, 0, k), "y_window"));
    g.z.push_back(z);
    for (int i = 1; i <= set.horizon(); ++i) {
        Var z_hat = native.step(p, z);
        Var yw = tape.constant({B, w * M}, observation_window(set, episodes, i, w), "y_next");
        z = net.update(p, z_hat, net.encode_window(p, yw));
        g.z.push_back(z);
    }
    g.x_hat = native.decode(p, nn::concat_rows(g.z));
    return g;
}

double gru_batch_loss(const GruAblationModel& model, const SequenceSet& set, std::span<const int> episodes,
                      nn::Gradients* grads, double weight) {
    nn::Tape tape;
    nn::Binding p(tape, model.params, grads ? nn::GradMode::trainable_only : nn::GradMode::none);
    const auto net = model.net();
    auto g = gru_forward(net, p, set, episodes);
    const auto target = frame_major_targets(set, episodes);
    Var loss = loss_intv(g.x_hat, target, static_cast<int>(episodes.size()), set.frames);
    if (grads) {
        tape.backward(loss);
        nn::add_into(*grads, p.gradients(), weight);
    }
    return loss.item();
}

std::vector<Reconstruction> gru_baseline_filter(const GruAblationModel& model, const SequenceSet& set,
                                                std::span<const int> episodes) {
    nn::Tape tape;
    nn::Binding p(tape, model.params, nn::GradMode::none);
    const auto net = model.net();
    auto g = gru_forward(net, p, set, episodes);
    const int B = static_cast<int>(episodes.size());
    auto out = split_frame_major(g.x_hat.value(), B, set.frames, set.grid);
    const int d = model.native_config.d_z;
    for (int b = 0; b < B; ++b) {
        auto& lt = out[static_cast<std::size_t>(b)].latents;
        lt.frames = set.frames;
        lt.d_z = d;
        for (const auto& z : g.z) {
            const auto v = z.value();
            lt.z.insert(lt.z.end(), v.begin() + static_cast<long>(b) * d, v.begin() + static_cast<long>(b + 1) * d);
        }
    }
    return out;
}

void save_gru_ablation(const std::filesystem::path& path, const GruAblationModel& model,
                       const nn::CheckpointHeader& extra) {
    nn::CheckpointHeader h = extra;
    h["model"] = "gru-ablation";
    model.native_config.write_header(h);
    model.config.write_header(h);
    nn::save_checkpoint(path, model.params, h);
}

GruAblationModel load_gru_ablation(const std::filesystem::path& path) {
    nn::CheckpointHeader h;
    GruAblationModel m;
    m.params = nn::load_checkpoint(path, &h);
    if (h["model"] != "gru-ablation") throw FormatError(path.string() + ": not a GRU-ablation checkpoint");
    m.native_config = NativeConfig::from_header(h);
    m.config = GruAblationConfig::from_header(h);
    const auto fresh = GruAblationModel::create(m.native_config, m.config, 0);
    if (fresh.params.size() != m.params.size()) throw FormatError(path.string() + ": architecture mismatch");
    return m;
}

} // namespace cessm::model
