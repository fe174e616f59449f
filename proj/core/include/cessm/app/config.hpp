// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cessm/fhn/dataset.hpp"
#include "cessm/model/gru_ablation.hpp"
#include "cessm/model/intervention.hpp"
#include "cessm/model/training.hpp"

namespace cessm::app {

/// Every knob of the pipeline. Defaults reproduce the desk-scale experiment.
struct RunConfig {
    // data
    int grid = 32;
    int frames = 60;
    int native_count = 200;
    int native_train = 160; // the remaining native episodes are held out
    int intv_train = 300;
    int intv_val = 20;
    int intv_test = 100;
    std::uint64_t seed_native_data = 11;
    std::uint64_t seed_intv_data = 23;
    double double_excitation_prob = 0.5;
    int foci_onset_min = 10;
    int foci_onset_max = 30;

    // observation
    int electrode_rows = 8;
    int electrode_cols = 8;
    double electrode_height_mm = 20.0;
    double lambda = 0.0; // <= 0: select on the validation split
    double lambda_min = 1e-4;
    double lambda_max = 1.0;
    int lambda_steps = 9;

    // models
    int k = 5;
    int d_z = 12;
    int d_a = 12;
    double beta = 5.0;
    int ode_hidden = 64;
    int steps_per_frame = 4;
    int intv_window = 5;
    int gru_window = 3;
    bool gru_warm_start = false;
    std::uint64_t seed_model = 5;

    // optimisation
    int batch = 16;
    int micro_batch = 16;
    double weight_decay = 1e-2;
    int epochs_native = 28;
    int epochs_intv = 36;
    int epochs_gru = 8;
    double lr_native = 0.0; // <= 0: learning-rate range test
    double lr_intv = 0.0;
    double lr_gru = 0.0;
    double lr_min = 1e-5;
    double lr_max = 1e-1;
    int lr_trials = 40;
    std::uint64_t seed_train = 3;

    // outputs
    int render_stride = 10;
    int render_episodes = 3;

    int intv_count() const { return intv_train + intv_val + intv_test; }
    void validate() const;

    fhn::GeneratorConfig generator() const;
    model::NativeConfig native_model() const;
    model::InterventionConfig intervention_model() const;
    model::GruAblationConfig gru_model() const;
    model::TrainConfig training(int epochs, double lr) const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// `key = value` lines in declaration order, with a comment header.
std::string serialize(const RunConfig& config);
/// Strict parser: unknown keys, duplicates and malformed values are rejected
/// with the line number; absent keys keep their defaults.
RunConfig parse_config(std::string_view text);
/// Applies one `key=value` override.
void apply_override(RunConfig& config, std::string_view assignment);

std::vector<std::string> config_keys();

} // namespace cessm::app
