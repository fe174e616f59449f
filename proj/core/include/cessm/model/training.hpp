// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cessm/model/gru_ablation.hpp"
#include "cessm/model/intervention.hpp"
#include "cessm/nn/lr_finder.hpp"
#include "cessm/nn/optim.hpp"

namespace cessm::model {

struct TrainConfig {
    int epochs = 20;
    int batch = 16;
    int micro_batch = 16;      // episodes per tape; gradients are accumulated up to `batch`
    double weight_decay = 1e-2;
    double lr = 0.0;           // <= 0 runs the learning-rate range test first
    nn::LrRangeConfig lr_range{1e-5, 1e-1, 40, 0.9, 4.0};
    std::uint64_t seed = 1;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainOutcome {
    nn::ParamSet best;           // parameters with the lowest validation loss
    int best_epoch = -1;         // -1: no epoch completed; `best` holds the initial parameters
    double best_val_loss = 0.0;
    double initial_val_loss = 0.0;
    double base_lr = 0.0;
    std::optional<nn::LrRangeResult> lr_range;
    std::vector<EpochRecord> history;
    bool diverged = false;
    std::string divergence_message;
};

/// Mean loss over `episodes`; adds d(mean loss)/d(theta) * weight into `grads` when non-null.
using BatchLossFn =
    std::function<double(const nn::ParamSet& params, std::span<const int> episodes, nn::Gradients* grads, double weight)>;

/// Splits `episodes` into micro-batches of at most `micro` and combines their
/// means (and gradients) into the mean over all of them.
double accumulate_loss(const BatchLossFn& fn, const nn::ParamSet& params, std::span<const int> episodes, int micro,
                       nn::Gradients* grads);

/// Mean loss over a set, evaluated in chunks.
double evaluate_loss(const BatchLossFn& fn, const nn::ParamSet& params, std::span<const int> episodes, int chunk);

/// Learning-rate range test on a copy of `params`, drawing batches from `train`.
nn::LrRangeResult find_learning_rate(const BatchLossFn& fn, const nn::ParamSet& params, std::span<const int> train,
                                     const TrainConfig& config);

/// AdamW training with step decay (x0.5 at 60% and 85% of the epochs) and
/// best-validation selection. On a non-finite loss, training stops and the
/// outcome carries the best finite parameters seen so far.
TrainOutcome train_loop(const nn::ParamSet& initial, const BatchLossFn& fn, std::span<const int> train,
                        std::span<const int> val, const TrainConfig& config,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

BatchLossFn native_loss_fn(const NativeModel& shape, const SequenceSet& set);
BatchLossFn intervention_loss_fn(const InterventionModel& shape, const obs::DenseMatrix& H, const SequenceSet& set);
BatchLossFn gru_loss_fn(const GruAblationModel& shape, const SequenceSet& set);

/// Builds a loss over a batch-local SequenceSet. Used to train on symmetry-augmented copies.
using LossFactory = std::function<BatchLossFn(const SequenceSet&)>;

/// Loss whose ids are e * 8 + t: episode e of `set` under the t-th symmetry of
/// the square (observations recomputed through H, which shares the symmetry
/// for a centred square electrode lattice).
BatchLossFn with_dihedral_augmentation(LossFactory factory, const SequenceSet& set, const obs::DenseMatrix& H);
/// All eight symmetry ids of each episode.
std::vector<int> dihedral_ids(std::span<const int> episodes);

/// Mean per-frame Dice of thresholded reconstructions against the binary targets.
double mean_dice(std::span<const Reconstruction> recon, const SequenceSet& set, std::span<const int> episodes);

} // namespace cessm::model
