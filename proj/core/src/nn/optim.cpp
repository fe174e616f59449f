// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/nn/optim.hpp"

#include <cmath>

#include "cessm/errors.hpp"

namespace cessm::nn {

OptimizerState OptimizerState::for_params(const ParamSet& params, const AdamWConfig& config) {
    OptimizerState s;
    s.config = config;
    for (const auto& a : params.arrays()) {
        s.first_moment.emplace_back(a.values.size(), 0.0);
        s.second_moment.emplace_back(a.values.size(), 0.0);
    }
    return s;
}

void adamw_step(ParamSet& params, const Gradients& grads, OptimizerState& state) {
    auto& arrays = params.arrays();
    if (grads.size() != arrays.size() || state.first_moment.size() != arrays.size()) {
        throw ShapeError("adamw_step: parameter, gradient and moment counts differ");
    }
    const auto& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        auto& a = arrays[i];
        if (!a.trainable) continue;
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto& g = grads[i];
        if (g.size() != a.values.size() || m.size() != a.values.size()) {
            throw ShapeError("adamw_step: shape mismatch for '" + a.name + "'");
        }
        for (std::size_t j = 0; j < a.values.size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            const double theta = a.values[j];
            a.values[j] = theta - c.lr * (m_hat / (std::sqrt(v_hat) + c.eps) + c.weight_decay * theta);
        }
    }
}

double step_decay_lr(double base_lr, int epoch, int total_epochs) {
    double lr = base_lr;
    if (epoch >= static_cast<int>(std::ceil(0.60 * total_epochs))) lr *= 0.5;
    if (epoch >= static_cast<int>(std::ceil(0.85 * total_epochs))) lr *= 0.5;
    return lr;
}

} // namespace cessm::nn
