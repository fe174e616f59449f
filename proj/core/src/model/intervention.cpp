// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/model/intervention.hpp"

#include <cmath>

#include "cessm/errors.hpp"
#include "cessm/io/container.hpp"
#include "cessm/io/sha256.hpp"
#include "cessm/nn/ode.hpp"
#include "cessm/nn/ops.hpp"

namespace cessm::model {

using nn::Var;

void InterventionConfig::validate(const NativeConfig& native) const {
    if (d_a != native.d_z) {
        throw PreconditionError("intervention model: d_a (" + std::to_string(d_a) + ") must equal d_z (" +
                                std::to_string(native.d_z) + ")");
    }
    if (window < 1) throw PreconditionError("intervention model: window must be >= 1");
    if (enc_hidden < 1 || enc_layers < 1 || ode_hidden < 1 || ode_layers < 1) {
        throw PreconditionError("intervention model: bad layer sizes");
    }
}

void InterventionConfig::write_header(nn::CheckpointHeader& h) const {
    h["intv.d_a"] = std::to_string(d_a);
    h["intv.window"] = std::to_string(window);
    h["intv.enc_hidden"] = std::to_string(enc_hidden);
    h["intv.enc_layers"] = std::to_string(enc_layers);
    h["intv.ode_hidden"] = std::to_string(ode_hidden);
    h["intv.ode_layers"] = std::to_string(ode_layers);
}

InterventionConfig InterventionConfig::from_header(const nn::CheckpointHeader& h) {
    InterventionConfig c;
    c.d_a = nn::header_int(h, "intv.d_a");
    c.window = nn::header_int(h, "intv.window");
    c.enc_hidden = nn::header_int(h, "intv.enc_hidden");
    c.enc_layers = nn::header_int(h, "intv.enc_layers");
    c.ode_hidden = nn::header_int(h, "intv.ode_hidden");
    c.ode_layers = nn::header_int(h, "intv.ode_layers");
    return c;
}

InterventionNet::InterventionNet(const NativeConfig& native, const InterventionConfig& config)
    : native_(native), config_(config) {
    config_.validate(native);
    f_a_ = nn::OdeFunc::make("f_a", config_.d_a, config_.ode_hidden, config_.ode_layers);
    enc_a_.name = "enc_a";
    enc_a_.widths.push_back(config_.window * native.electrodes());
    for (int i = 0; i < config_.enc_layers; ++i) enc_a_.widths.push_back(config_.enc_hidden);
    enc_a_.widths.push_back(config_.d_a);
    g_a_ = nn::GruCell{"g_a", config_.d_a, config_.d_a};
}

void InterventionNet::declare(nn::ParamSet& params, std::mt19937_64& rng) const {
    f_a_.declare(params, rng, /*zero_last=*/true);
    enc_a_.declare(params, rng);
    g_a_.declare(params, rng);
}

std::pair<Var, Var> InterventionNet::predict_coupled(const nn::Binding& p, Var z, Var a) const {
    const nn::VectorField field = [&](const std::vector<Var>& s) {
        Var fa = f_a_(p, s[0]);
        Var fz = nn::add(native_.field(p, s[1]), fa);
        return std::vector<Var>{fa, fz};
    };
    auto out = nn::rk4_integrate(field, {a, z}, 0.0, 1.0, native_.config().steps_per_frame);
    return {out[1], out[0]};
}

std::vector<Var> InterventionNet::hypothetical_latents(const nn::Binding& p, Var z_prev, int window) const {
    if (window < 1) throw PreconditionError("hypothetical rollout: window must be >= 1");
    std::vector<Var> zs;
    Var z = z_prev;
    for (int j = 0; j < window; ++j) {
        z = native_.step(p, z);
        zs.push_back(z);
    }
    return zs;
}

Var InterventionNet::hypothetical_rollout(const nn::Binding& p, Var z_prev, int window) const {
    return native_.decode(p, nn::concat_rows(hypothetical_latents(p, z_prev, window)));
}

Var InterventionNet::encode_intervention(const nn::Binding& p, Var residual) const {
    if (residual.size() != residual.rows() * enc_a_.input_dim()) {
        throw ShapeError("encode_intervention: expected [B, " + std::to_string(enc_a_.input_dim()) + "], got " +
                         nn::shape_string(residual.shape()));
    }
    return enc_a_(p, residual);
}

Var InterventionNet::update_intervention(const nn::Binding& p, Var a_hat, Var a_enc) const {
    return g_a_(p, a_hat, a_enc);
}

InterventionModel InterventionModel::from_native(const NativeModel& native, const InterventionConfig& config,
                                                 std::uint64_t seed, std::string native_sha256) {
    InterventionModel m;
    m.native_config = native.config;
    m.config = config;
    m.native_sha256 = std::move(native_sha256);
    m.params = native.params;
    for (auto& a : m.params.arrays()) a.trainable = false;
    std::mt19937_64 rng(seed);
    InterventionNet(native.config, config).declare(m.params, rng);
    return m;
}

NativeModel InterventionModel::native() const {
    NativeModel n = NativeModel::create(native_config, 0);
    for (auto& a : n.params.arrays()) a.values = params.at(a.name).values;
    return n;
}

std::vector<double> residual_sequence(const obs::DenseMatrix& H, std::span<const double> x_hat,
                                      std::span<const double> y, int window) {
    const int P = H.cols, M = H.rows;
    if (window < 1) throw PreconditionError("residual_sequence: window must be >= 1");
    if (x_hat.size() % static_cast<std::size_t>(P) != 0) throw ShapeError("residual_sequence: partial frame");
    const int available = static_cast<int>(x_hat.size() / static_cast<std::size_t>(P));
    if (available > window) throw ShapeError("residual_sequence: more frames than the window");
    if (y.size() != static_cast<std::size_t>(available) * M) {
        throw ShapeError("residual_sequence: observation frames do not match the reconstruction");
    }
    std::vector<double> out(static_cast<std::size_t>(window) * M, 0.0);
    for (int j = 0; j < available; ++j) {
        const auto hx = obs::observe_frame(H, x_hat.subspan(static_cast<std::size_t>(j) * P, P));
        for (int m = 0; m < M; ++m) {
            out[static_cast<std::size_t>(j) * M + m] = std::abs(hx[static_cast<std::size_t>(m)] - y[static_cast<std::size_t>(j) * M + m]);
        }
    }
    return out;
}

FilterGraph filter_forward(const InterventionNet& net, const nn::Binding& p, Var H, const SequenceSet& set,
                           std::span<const int> episodes) {
    const NativeNet& native = net.native();
    const int B = static_cast<int>(episodes.size());
    const int k = native.config().k;
    const int w = net.config().window;
    const int M = set.electrodes;
    const int T = set.horizon();
    if (set.frames < k) throw PreconditionError("filter: sequence shorter than k");
    if (H.rows() != M || H.cols() != set.pixels()) throw ShapeError("filter: H does not match the data");
    auto& tape = p.tape();

    FilterGraph g;
    Var z = native.encode(p, tape.constant({B, k * M}, observation_window(set, episodes, 0, k), "y_window"));
    Var a = tape.constant({B, net.config().d_a}, std::vector<double>(static_cast<std::size_t>(B) * net.config().d_a, 0.0), "a0");
    g.z.push_back(z);
    g.a.push_back(a);
    const Var zero_rows = tape.constant({B, M}, std::vector<double>(static_cast<std::size_t>(B) * M, 0.0), "pad");
    for (int i = 1; i <= T; ++i) {
        auto [z_hat, a_hat] = net.predict_coupled(p, z, a);
        const int avail = std::min(w, T - i + 1);
        Var decoded = net.hypothetical_rollout(p, z, avail);
        Var projected = nn::dense(decoded, H);
        // Observations ordered like the decoded rows: window-major, then episode.
        std::vector<double> y(static_cast<std::size_t>(avail) * B * M);
        for (int j = 0; j < avail; ++j) {
            for (int b = 0; b < B; ++b) {
                const auto& ye = set.y[static_cast<std::size_t>(episodes[static_cast<std::size_t>(b)])];
                std::copy_n(ye.begin() + static_cast<long>(i + j) * M, M,
                            y.begin() + (static_cast<long>(j) * B + b) * M);
            }
        }
        Var diff = nn::absolute(nn::sub(projected, tape.constant({avail * B, M}, std::move(y), "y_obs")));
        std::vector<Var> pieces;
        for (int j = 0; j < w; ++j) pieces.push_back(j < avail ? nn::slice_rows(diff, j * B, B) : zero_rows);
        Var residual = nn::concat_cols(pieces);
        Var a_enc = net.encode_intervention(p, residual);
        a = net.update_intervention(p, a_hat, a_enc);
        z = z_hat;
        g.z.push_back(z);
        g.a.push_back(a);
        g.residual.push_back(residual);
    }
    g.x_hat = native.decode(p, nn::concat_rows(g.z));
    return g;
}

double intervention_batch_loss(const InterventionModel& model, const obs::DenseMatrix& H, const SequenceSet& set,
                               std::span<const int> episodes, nn::Gradients* grads, double weight) {
    nn::Tape tape;
    nn::Binding p(tape, model.params, grads ? nn::GradMode::trainable_only : nn::GradMode::none);
    const auto net = model.net();
    Var Hv = tape.constant({H.rows, H.cols}, H.data, "H");
    auto g = filter_forward(net, p, Hv, set, episodes);
    const auto target = frame_major_targets(set, episodes);
    Var loss = loss_intv(g.x_hat, target, static_cast<int>(episodes.size()), set.frames);
    if (grads) {
        tape.backward(loss);
        nn::add_into(*grads, p.gradients(), weight);
    }
    return loss.item();
}

namespace {

void copy_rows(const std::vector<Var>& states, int b, int d, std::vector<double>& out) {
    for (const auto& s : states) {
        const auto v = s.value();
        out.insert(out.end(), v.begin() + static_cast<long>(b) * d, v.begin() + static_cast<long>(b + 1) * d);
    }
}

} // namespace

std::vector<Reconstruction> filter_sequence(const InterventionModel& model, const obs::DenseMatrix& H,
                                            const SequenceSet& set, std::span<const int> episodes) {
    nn::Tape tape;
    nn::Binding p(tape, model.params, nn::GradMode::none);
    const auto net = model.net();
    Var Hv = tape.constant({H.rows, H.cols}, H.data, "H");
    auto g = filter_forward(net, p, Hv, set, episodes);
    const int B = static_cast<int>(episodes.size());
    auto out = split_frame_major(g.x_hat.value(), B, set.frames, set.grid);
    const int dz = model.native_config.d_z, da = model.config.d_a;
    const int rw = model.config.window * set.electrodes;
    for (int b = 0; b < B; ++b) {
        auto& r = out[static_cast<std::size_t>(b)];
        r.latents.frames = set.frames;
        r.latents.d_z = dz;
        r.latents.d_a = da;
        copy_rows(g.z, b, dz, r.latents.z);
        copy_rows(g.a, b, da, r.latents.a);
        copy_rows(g.residual, b, rw, r.residuals);
    }
    return out;
}

void save_intervention(const std::filesystem::path& path, const InterventionModel& model,
                       const nn::CheckpointHeader& extra) {
    nn::CheckpointHeader h = extra;
    h["model"] = "intervention";
    h["native_sha256"] = model.native_sha256.empty() ? "-" : model.native_sha256;
    model.native_config.write_header(h);
    model.config.write_header(h);
    nn::save_checkpoint(path, model.params, h);
}

InterventionModel load_intervention(const std::filesystem::path& path, const std::filesystem::path& native_path) {
    nn::CheckpointHeader h;
    InterventionModel m;
    m.params = nn::load_checkpoint(path, &h);
    if (h["model"] != "intervention") throw FormatError(path.string() + ": not an intervention-model checkpoint");
    m.native_config = NativeConfig::from_header(h);
    m.config = InterventionConfig::from_header(h);
    m.native_sha256 = h["native_sha256"];
    const auto actual = io::sha256_hex(io::read_bytes(native_path));
    if (actual != m.native_sha256) {
        throw PreconditionError(path.string() + " was trained against a stage-1 checkpoint with SHA-256 " +
                                m.native_sha256 + ", but " + native_path.string() + " has " + actual);
    }
    const auto native = load_native(native_path);
    for (const auto& a : native.params.arrays()) {
        if (!m.params.contains(a.name) || m.params.at(a.name).values != a.values) {
            throw FormatError(path.string() + ": native array '" + a.name + "' differs from the stage-1 checkpoint");
        }
    }
    const auto fresh = InterventionModel::from_native(native, m.config, 0);
    if (fresh.params.size() != m.params.size()) throw FormatError(path.string() + ": architecture mismatch");
    return m;
}

} // namespace cessm::model
