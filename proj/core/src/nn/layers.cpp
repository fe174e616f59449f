// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/nn/layers.hpp"

#include <cmath>

#include "cessm/errors.hpp"

namespace cessm::nn {

Var activate(Var x, Activation act) {
    switch (act) {
    case Activation::none: return x;
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::elu: return elu(x);
    }
    return x;
}

void init_uniform_fan_in(std::vector<double>& values, int fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : values) v = dist(rng);
}

void Dense::declare(ParamSet& params, std::mt19937_64& rng, bool zero) const {
    auto& w = params.add(name + ".weight", {out, in});
    auto& b = params.add(name + ".bias", {out});
    if (!zero) {
        init_uniform_fan_in(w.values, in, rng);
        init_uniform_fan_in(b.values, in, rng);
    }
}

Var Dense::operator()(const Binding& p, Var x) const {
    Var y = dense(x, p[name + ".weight"], p[name + ".bias"]);
    p.tape().set_label(y, name);
    return y;
}

void Conv2d::declare(ParamSet& params, std::mt19937_64& rng) const {
    auto& w = params.add(name + ".weight", {out_channels, in_channels, kernel, kernel});
    auto& b = params.add(name + ".bias", {out_channels});
    init_uniform_fan_in(w.values, in_channels * kernel * kernel, rng);
    init_uniform_fan_in(b.values, in_channels * kernel * kernel, rng);
}

Var Conv2d::operator()(const Binding& p, Var x) const {
    Var y = conv2d(x, p[name + ".weight"], p[name + ".bias"], stride, pad);
    p.tape().set_label(y, name);
    return y;
}

void ConvTranspose2d::declare(ParamSet& params, std::mt19937_64& rng) const {
    auto& w = params.add(name + ".weight", {in_channels, out_channels, kernel, kernel});
    auto& b = params.add(name + ".bias", {out_channels});
    init_uniform_fan_in(w.values, out_channels * kernel * kernel, rng);
    init_uniform_fan_in(b.values, out_channels * kernel * kernel, rng);
}

Var ConvTranspose2d::operator()(const Binding& p, Var x) const {
    Var y = conv_transpose2d(x, p[name + ".weight"], p[name + ".bias"], stride, pad);
    p.tape().set_label(y, name);
    return y;
}

Dense Mlp::layer(std::size_t i) const {
    return Dense{name + "." + std::to_string(i), widths[i], widths[i + 1]};
}

void Mlp::declare(ParamSet& params, std::mt19937_64& rng, bool zero_last) const {
    if (widths.size() < 2) throw ShapeError("mlp '" + name + "': need at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layer(i).declare(params, rng, zero_last && i + 2 == widths.size());
    }
}

Var Mlp::operator()(const Binding& p, Var x) const {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        x = layer(i)(p, x);
        if (i + 2 < widths.size()) x = activate(x, hidden_activation);
    }
    return x;
}

OdeFunc OdeFunc::make(std::string name, int dim, int hidden_width, int hidden_layers) {
    OdeFunc f;
    f.mlp.name = std::move(name);
    f.mlp.widths.push_back(dim);
    for (int i = 0; i < hidden_layers; ++i) f.mlp.widths.push_back(hidden_width);
    f.mlp.widths.push_back(dim);
    return f;
}

void OdeFunc::declare(ParamSet& params, std::mt19937_64& rng, bool zero_last) const {
    if (mlp.input_dim() != mlp.output_dim()) throw ShapeError("ode func '" + mlp.name + "': output dim != input dim");
    mlp.declare(params, rng, zero_last);
}

void GruCell::declare(ParamSet& params, std::mt19937_64& rng) const {
    for (const char* gate : {"u", "r", "n"}) {
        auto& w = params.add(name + ".w_" + gate, {hidden, input});
        auto& u = params.add(name + ".u_" + gate, {hidden, hidden});
        auto& b = params.add(name + ".b_" + gate, {hidden});
        init_uniform_fan_in(w.values, hidden, rng);
        init_uniform_fan_in(u.values, hidden, rng);
        init_uniform_fan_in(b.values, hidden, rng);
    }
}

Var GruCell::operator()(const Binding& p, Var h, Var x) const {
    auto gate = [&](const char* g, Var hidden_in) {
        return add(dense(x, p[name + ".w_" + g], p[name + ".b_" + g]), dense(hidden_in, p[name + ".u_" + g]));
    };
    Var u = sigmoid(gate("u", h));
    Var r = sigmoid(gate("r", h));
    Var n = tanh(gate("n", mul(r, h)));
    Var out = add(mul(affine(u, -1.0, 1.0), n), mul(u, h));
    p.tape().set_label(out, name);
    return out;
}

} // namespace cessm::nn
