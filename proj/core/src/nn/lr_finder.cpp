// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/nn/lr_finder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cessm/errors.hpp"

namespace cessm::nn {

LrRangeResult lr_range_test(const std::function<double(double, int)>& train_step, const LrRangeConfig& cfg) {
    if (cfg.n_trials < 10) throw PreconditionError("lr_range_test: n_trials must be >= 10");
    if (!(cfg.lr_min > 0.0) || !(cfg.lr_max > cfg.lr_min)) {
        throw PreconditionError("lr_range_test: need 0 < lr_min < lr_max");
    }
    LrRangeResult res;
    const double growth = std::pow(cfg.lr_max / cfg.lr_min, 1.0 / (cfg.n_trials - 1));
    double avg = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < cfg.n_trials; ++trial) {
        const double lr = cfg.lr_min * std::pow(growth, trial);
        const double loss = train_step(lr, trial);
        res.lrs.push_back(lr);
        res.losses.push_back(loss);
        if (!std::isfinite(loss)) {
            res.divergence_index = trial;
            break;
        }
        avg = cfg.smoothing * avg + (1.0 - cfg.smoothing) * loss;
        const double smoothed = avg / (1.0 - std::pow(cfg.smoothing, trial + 1));
        res.smoothed.push_back(smoothed);
        if (trial > 0 && smoothed > cfg.divergence_factor * best) {
            res.divergence_index = trial;
            break;
        }
        best = std::min(best, smoothed);
    }
    // Usable points are those strictly before divergence.
    const int usable = res.divergence_index >= 0 ? res.divergence_index : static_cast<int>(res.smoothed.size());
    if (usable < 3) {
        throw Error("lr_range_test: loss diverged within the first trials; retry with a smaller lr_max");
    }
    std::vector<double> logs(res.lrs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(res.lrs[i]);
    int best_idx = -1;
    double steepest = 0.0;
    auto consider = [&](int i, double slope, double level) {
        // Rounding in the bias-corrected average must not count as a decrease.
        if (slope < steepest && slope < -1e-9 * std::max(1.0, std::abs(level))) {
            steepest = slope;
            best_idx = i;
        }
    };
    const int half = cfg.slope_window / 2;
    if (cfg.slope_window >= 3 && usable >= 2 * half + 1) {
        for (int i = half; i + half < usable; ++i) {
            double mx = 0.0, my = 0.0;
            for (int j = i - half; j <= i + half; ++j) {
                mx += logs[j];
                my += res.losses[j];
            }
            mx /= 2 * half + 1;
            my /= 2 * half + 1;
            double sxy = 0.0, sxx = 0.0;
            for (int j = i - half; j <= i + half; ++j) {
                sxy += (logs[j] - mx) * (res.losses[j] - my);
                sxx += (logs[j] - mx) * (logs[j] - mx);
            }
            consider(i, sxy / sxx, my);
        }
    } else {
        for (int i = 1; i < usable; ++i) {
            consider(i, (res.smoothed[i] - res.smoothed[i - 1]) / (logs[i] - logs[i - 1]), res.smoothed[i]);
        }
    }
    if (best_idx < 0) throw Error("lr_range_test: smoothed loss never decreased; retry with a larger lr_max");
    res.suggested_lr = res.lrs[best_idx];
    return res;
}

} // namespace cessm::nn
