// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/model/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cessm/errors.hpp"

namespace cessm::model {

namespace {

bool finite(const nn::Gradients& g) {
    for (const auto& v : g) {
        for (double x : v) {
            if (!std::isfinite(x)) return false;
        }
    }
    return true;
}

std::vector<int> shuffled(std::span<const int> items, std::uint64_t seed) {
    std::vector<int> out(items.begin(), items.end());
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit index draw keeps the order independent of the standard library.
    for (std::size_t i = out.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(out[i - 1], out[j]);
    }
    return out;
}

} // namespace

double accumulate_loss(const BatchLossFn& fn, const nn::ParamSet& params, std::span<const int> episodes, int micro,
                       nn::Gradients* grads) {
    if (episodes.empty()) throw PreconditionError("loss: empty batch");
    micro = std::max(micro, 1);
    const double n = static_cast<double>(episodes.size());
    double total = 0.0;
    for (std::size_t begin = 0; begin < episodes.size(); begin += static_cast<std::size_t>(micro)) {
        const auto count = std::min<std::size_t>(static_cast<std::size_t>(micro), episodes.size() - begin);
        const double w = static_cast<double>(count) / n;
        total += w * fn(params, episodes.subspan(begin, count), grads, w);
    }
    return total;
}

double evaluate_loss(const BatchLossFn& fn, const nn::ParamSet& params, std::span<const int> episodes, int chunk) {
    return accumulate_loss(fn, params, episodes, chunk, nullptr);
}

nn::LrRangeResult find_learning_rate(const BatchLossFn& fn, const nn::ParamSet& params, std::span<const int> train,
                                     const TrainConfig& config) {
    if (train.empty()) throw PreconditionError("learning-rate range test: empty training set");
    nn::ParamSet trial_params = params;
    nn::AdamWConfig opt;
    opt.weight_decay = config.weight_decay;
    auto state = nn::OptimizerState::for_params(trial_params, opt);
    // Trials step on successive batches but are scored on one fixed probe batch, so the recorded curve reflects
    // the learning rate rather than batch-to-batch variation in the loss.
    const auto order = shuffled(train, config.seed ^ 0x5eedULL);
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch), order.size());
    const std::span<const int> probe(order.data(), batch);
    std::size_t cursor = 0;
    auto step = [&](double lr, int) -> double {
        if (cursor + batch > order.size()) cursor = 0;
        const std::span<const int> eps(order.data() + cursor, batch);
        cursor += batch;
        auto grads = nn::zero_gradients(trial_params);
        try {
            accumulate_loss(fn, trial_params, eps, config.micro_batch, &grads);
            if (!finite(grads)) return std::numeric_limits<double>::quiet_NaN();
            state.config.lr = lr;
            nn::adamw_step(trial_params, grads, state);
            return evaluate_loss(fn, trial_params, probe, config.micro_batch);
        } catch (const DivergedError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    return nn::lr_range_test(step, config.lr_range);
}

TrainOutcome train_loop(const nn::ParamSet& initial, const BatchLossFn& fn, std::span<const int> train,
                        std::span<const int> val, const TrainConfig& config,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
    if (train.empty()) throw PreconditionError("training: empty training set");
    if (config.epochs < 1 || config.batch < 1) throw PreconditionError("training: epochs and batch must be >= 1");
    const std::span<const int> val_set = val.empty() ? train : val;

    TrainOutcome out;
    nn::ParamSet params = initial;
    out.best = params;
    out.initial_val_loss = evaluate_loss(fn, params, val_set, config.micro_batch);
    out.best_val_loss = out.initial_val_loss;

    if (config.lr > 0.0) {
        out.base_lr = config.lr;
    } else {
        out.lr_range = find_learning_rate(fn, params, train, config);
        out.base_lr = out.lr_range->suggested_lr;
    }

    nn::AdamWConfig opt;
    opt.lr = out.base_lr;
    opt.weight_decay = config.weight_decay;
    auto state = nn::OptimizerState::for_params(params, opt);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = nn::step_decay_lr(out.base_lr, epoch, config.epochs);
        state.config.lr = rec.lr;
        const auto order = shuffled(train, config.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch));
        double sum = 0.0;
        try {
            for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch)) {
                const auto count = std::min<std::size_t>(static_cast<std::size_t>(config.batch), order.size() - begin);
                std::span<const int> eps(order.data() + begin, count);
                auto grads = nn::zero_gradients(params);
                const double loss = accumulate_loss(fn, params, eps, config.micro_batch, &grads);
                if (!std::isfinite(loss) || !finite(grads)) {
                    throw DivergedError("non-finite loss or gradient at epoch " + std::to_string(epoch));
                }
                nn::adamw_step(params, grads, state);
                if (!params.all_finite()) throw DivergedError("non-finite parameters at epoch " + std::to_string(epoch));
                sum += loss * static_cast<double>(count);
            }
            rec.train_loss = sum / static_cast<double>(order.size());
            rec.val_loss = evaluate_loss(fn, params, val_set, config.micro_batch);
        } catch (const DivergedError& e) {
            out.diverged = true;
            out.divergence_message = e.what();
            return out;
        }
        out.history.push_back(rec);
        if (rec.val_loss < out.best_val_loss) {
            out.best_val_loss = rec.val_loss;
            out.best = params;
            out.best_epoch = epoch;
        }
        if (on_epoch) on_epoch(rec);
    }
    return out;
}

BatchLossFn native_loss_fn(const NativeModel& shape, const SequenceSet& set) {
    const NativeConfig cfg = shape.config;
    return [cfg, &set](const nn::ParamSet& params, std::span<const int> eps, nn::Gradients* grads, double w) {
        NativeModel m{cfg, params};
        return native_batch_loss(m, set, eps, grads, w);
    };
}

BatchLossFn intervention_loss_fn(const InterventionModel& shape, const obs::DenseMatrix& H, const SequenceSet& set) {
    const NativeConfig ncfg = shape.native_config;
    const InterventionConfig icfg = shape.config;
    const std::string hash = shape.native_sha256;
    return [ncfg, icfg, hash, &H, &set](const nn::ParamSet& params, std::span<const int> eps, nn::Gradients* grads,
                                         double w) {
        InterventionModel m{ncfg, icfg, params, hash};
        return intervention_batch_loss(m, H, set, eps, grads, w);
    };
}

BatchLossFn gru_loss_fn(const GruAblationModel& shape, const SequenceSet& set) {
    const NativeConfig ncfg = shape.native_config;
    const GruAblationConfig gcfg = shape.config;
    return [ncfg, gcfg, &set](const nn::ParamSet& params, std::span<const int> eps, nn::Gradients* grads, double w) {
        GruAblationModel m{ncfg, gcfg, params};
        return gru_batch_loss(m, set, eps, grads, w);
    };
}

BatchLossFn with_dihedral_augmentation(LossFactory factory, const SequenceSet& set, const obs::DenseMatrix& H) {
    return [factory = std::move(factory), &set, &H](const nn::ParamSet& params, std::span<const int> ids,
                                                     nn::Gradients* grads, double w) {
        const SequenceSet local = select_episodes(set, ids, H, true);
        std::vector<int> local_ids(ids.size());
        std::iota(local_ids.begin(), local_ids.end(), 0);
        return factory(local)(params, local_ids, grads, w);
    };
}

std::vector<int> dihedral_ids(std::span<const int> episodes) {
    std::vector<int> out;
    out.reserve(episodes.size() * 8);
    for (int e : episodes) {
        for (int t = 0; t < 8; ++t) out.push_back(e * 8 + t);
    }
    return out;
}

double mean_dice(std::span<const Reconstruction> recon, const SequenceSet& set, std::span<const int> episodes) {
    if (recon.size() != episodes.size() || recon.empty()) throw PreconditionError("mean_dice: mismatched inputs");
    double s = 0.0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        s += mean_frame_dice(threshold(recon[i].x_hat), binary_sequence(set, episodes[i]));
    }
    return s / static_cast<double>(recon.size());
}

} // namespace cessm::model
