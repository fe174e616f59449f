// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cessm/eval/detect.hpp"
#include "cessm/fhn/simulator.hpp"
#include "cessm/model/sequences.hpp"

namespace cessm::eval {

struct EpisodeScore {
    int episode = 0;
    bool found = false;
    int onset_frame = -1;
    int true_onset = 0;
    double time_error = 0.0;        // |onset - t_f|, frames
    double location_error_mm = 0.0; // centroid to focus centre
};

struct LocalizationReport {
    std::string model;
    double pct_identified = 0.0;
    double timestep_mae = 0.0;     // over found cases; NaN when none was found
    double location_error_mm = 0.0;
    std::vector<EpisodeScore> rows;
};

/// Throws PreconditionError on empty or mismatched input, or on a meta without a focus.
LocalizationReport localization_metrics(std::span<const Detection> detections,
                                        std::span<const fhn::EpisodeMeta> metas, double dx_mm,
                                        const std::string& model = {});

/// Tab-separated table with header `model pct_identified timestep_mae location_error_mm`.
std::string format_report_table(std::span<const LocalizationReport> reports);
/// Per-episode rows of one report.
std::string format_episode_rows(const LocalizationReport& report);

/// Min-max scaling to [0, 1]; a constant curve maps to zeros.
std::vector<double> min_max_normalize(std::span<const double> values);

/// Per-frame L2 norms of z and a, each min-max normalised on its own; the second
/// curve is empty when the trajectory has no intervention state.
std::pair<std::vector<double>, std::vector<double>> latent_norm_curves(const model::LatentTrajectory& trajectory);

/// Whether the normalised curve's mean over [t_f, t_f + 5] exceeds its mean over [0, t_f - 5].
bool onset_signal_rises(std::span<const double> curve, int onset_frame);

} // namespace cessm::eval
