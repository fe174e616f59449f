// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "cessm/nn/params.hpp"

namespace cessm::nn {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

struct OptimizerState {
    AdamWConfig config;
    long step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    static OptimizerState for_params(const ParamSet& params, const AdamWConfig& config);
};

/// Bias-corrected Adam with decoupled weight decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
/// Frozen (non-trainable) arrays are left bit-unchanged.
void adamw_step(ParamSet& params, const Gradients& grads, OptimizerState& state);

/// Base rate halved at 60% and again at 85% of the epochs.
double step_decay_lr(double base_lr, int epoch, int total_epochs);

} // namespace cessm::nn
