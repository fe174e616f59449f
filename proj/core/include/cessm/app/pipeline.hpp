// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Seeded pipeline stages. Each stage writes into its own directory under the
// output root, together with the exact configuration it ran with and a log.
// Stages never overwrite: an existing stage directory is an error.
//
//   <root>/data/                native.{bin,meta.jsonl}, intervention.{bin,meta.jsonl}, forward.bin
//   <root>/lr-find/<model>/     lr_range.tsv, suggested_lr.txt
//   <root>/native/              model.ckpt, train_log.tsv
//   <root>/intv/                model.ckpt, train_log.tsv
//   <root>/gru/                 model.ckpt, train_log.tsv
//   <root>/ecgi/                lambda_sweep.tsv, lambda.txt
//   <root>/eval/                report.tsv, <model>_episodes.tsv
//   <root>/render/              episode_<index>.pgm
//   <root>/latents/             curves.tsv, summary.tsv

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cessm/app/config.hpp"

namespace cessm::app {

struct StageOptions {
    std::optional<double> lambda; // overrides RunConfig::lambda for ecgi and eval
    std::string lr_model = "native"; // lr-find target: native, intv or gru
    std::ostream* echo = nullptr;    // log lines are mirrored here when set
};

/// Names accepted by run_stage, in pipeline order.
const std::vector<std::string>& stage_names();

/// Runs one stage. Throws PreconditionError for a missing prerequisite
/// artifact (naming the file) or an existing stage directory, and any library
/// error raised by the stage itself.
void run_stage(std::string_view name, const RunConfig& config, const std::filesystem::path& root,
               const StageOptions& options = {});

/// simulate, train-native, train-intv, train-gru-ablation, ecgi, eval.
void run_pipeline(const RunConfig& config, const std::filesystem::path& root, const StageOptions& options = {});

/// Episode index ranges of the splits.
struct Splits {
    std::vector<int> native_train;
    std::vector<int> native_heldout;
    std::vector<int> intv_train;
    std::vector<int> intv_val;
    std::vector<int> intv_test;
};
Splits make_splits(const RunConfig& config);

} // namespace cessm::app
