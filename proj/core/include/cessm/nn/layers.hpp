// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Layer descriptors. A layer owns no values: `declare` adds its arrays to a
// ParamSet under `name`, and the call operator builds the forward graph from a
// Binding.

#include <random>
#include <string>
#include <vector>

#include "cessm/nn/ops.hpp"
#include "cessm/nn/params.hpp"

namespace cessm::nn {

enum class Activation { none, tanh, sigmoid, elu };

Var activate(Var x, Activation act);

/// Fills `values` with U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fan_in(std::vector<double>& values, int fan_in, std::mt19937_64& rng);

struct Dense {
    std::string name;
    int in = 0;
    int out = 0;

    void declare(ParamSet& params, std::mt19937_64& rng, bool zero = false) const;
    Var operator()(const Binding& p, Var x) const;
};

struct Conv2d {
    std::string name;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 1;

    void declare(ParamSet& params, std::mt19937_64& rng) const;
    Var operator()(const Binding& p, Var x) const;
};

struct ConvTranspose2d {
    std::string name;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 4;
    int stride = 2;
    int pad = 1;

    void declare(ParamSet& params, std::mt19937_64& rng) const;
    Var operator()(const Binding& p, Var x) const;
};

/// Fully connected stack; `widths` = {in, hidden..., out}. Hidden layers use
/// `hidden_activation`, the output layer is linear.
struct Mlp {
    std::string name;
    std::vector<int> widths;
    Activation hidden_activation = Activation::tanh;

    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    Dense layer(std::size_t i) const;
    /// `zero_last` initialises the final layer's weights and bias to exactly zero.
    void declare(ParamSet& params, std::mt19937_64& rng, bool zero_last = false) const;
    Var operator()(const Binding& p, Var x) const;
};

/// Latent vector field dz/dt = F(z): an Mlp whose output width equals its input width.
struct OdeFunc {
    Mlp mlp;

    static OdeFunc make(std::string name, int dim, int hidden_width = 64, int hidden_layers = 2);
    int dim() const { return mlp.input_dim(); }
    void declare(ParamSet& params, std::mt19937_64& rng, bool zero_last = false) const;
    Var operator()(const Binding& p, Var s) const { return mlp(p, s); }
};

/// Gated recurrent unit:
///   u  = sigmoid(W_u x + U_u h + b_u)
///   r  = sigmoid(W_r x + U_r h + b_r)
///   n  = tanh(W_n x + U_n (r * h) + b_n)
///   h' = (1 - u) * n + u * h
struct GruCell {
    std::string name;
    int input = 0;
    int hidden = 0;

    void declare(ParamSet& params, std::mt19937_64& rng) const;
    Var operator()(const Binding& p, Var h, Var x) const;
};

} // namespace cessm::nn
