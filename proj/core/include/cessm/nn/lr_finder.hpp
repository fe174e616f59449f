// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

namespace cessm::nn {

struct LrRangeConfig {
    double lr_min = 1e-7;
    double lr_max = 1.0;
    int n_trials = 100;
    double smoothing = 0.98;        // exponential moving average factor
    double divergence_factor = 4.0; // stop once smoothed loss > factor * best
    // Trials in the centred least-squares fit of loss against log(lr) used to locate the steepest descent.
    // Values below 3 fall back to differences of the moving average, which lags the sweep.
    int slope_window = 7;
};

struct LrRangeResult {
    double suggested_lr = 0.0;
    std::vector<double> lrs;
    std::vector<double> losses;
    std::vector<double> smoothed;
    int divergence_index = -1; // first trial judged divergent, -1 if none
};

/// Learning-rate range test: `train_step(lr, trial)` performs one optimisation
/// step at `lr` and returns the loss. The rate grows geometrically from lr_min
/// to lr_max; the suggestion is the rate of steepest descent of the
/// bias-corrected smoothed loss, taken strictly before divergence.
/// Throws PreconditionError for n_trials < 10 and Error when the sweep
/// diverges before a usable descent was recorded.
LrRangeResult lr_range_test(const std::function<double(double lr, int trial)>& train_step,
                            const LrRangeConfig& config);

} // namespace cessm::nn
