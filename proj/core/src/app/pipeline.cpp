// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/app/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cessm/errors.hpp"
#include "cessm/eval/detect.hpp"
#include "cessm/eval/metrics.hpp"
#include "cessm/eval/render.hpp"
#include "cessm/io/container.hpp"
#include "cessm/io/sha256.hpp"
#include "cessm/obs/tikhonov.hpp"

namespace cessm::app {

namespace fs = std::filesystem;

namespace {

constexpr int kInferenceChunk = 8;

class Stage {
public:
    Stage(const fs::path& dir, const RunConfig& config, const StageOptions& options)
        : dir_(dir), echo_(options.echo), start_(std::chrono::steady_clock::now()) {
        if (fs::exists(dir_)) {
            throw PreconditionError("output directory " + dir_.string() +
                                    " already exists; artifacts are never overwritten (choose another --out)");
        }
        fs::create_directories(dir_);
        write("config.txt", serialize(config));
        log_.open(dir_ / "log.txt");
    }

    const fs::path& dir() const { return dir_; }

    void log(const std::string& line) {
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ostringstream os;
        os.setf(std::ios::fixed);
        os.precision(1);
        os << '[' << t << "s] " << line;
        log_ << os.str() << '\n';
        log_.flush();
        if (echo_) *echo_ << os.str() << std::endl;
    }

    void write(const std::string& name, const std::string& content) const {
        io::write_bytes_new(dir_ / name, content);
    }

private:
    fs::path dir_;
    std::ostream* echo_;
    std::ofstream log_;
    std::chrono::steady_clock::time_point start_;
};

fs::path require(const fs::path& path, const std::string& producer) {
    if (!fs::exists(path)) {
        throw PreconditionError("missing prerequisite artifact " + path.string() + " (run '" + producer + "' first)");
    }
    return path;
}

std::vector<int> range(int begin, int count) {
    std::vector<int> v(static_cast<std::size_t>(std::max(count, 0)));
    std::iota(v.begin(), v.end(), begin);
    return v;
}

std::string num(double v) { return std::isfinite(v) ? nn::format_double(v) : std::string("nan"); }

struct Data {
    fhn::Dataset native;
    fhn::Dataset intv;
    obs::ForwardOperator op;
};

obs::ForwardOperator load_operator(const fs::path& root) {
    return obs::load_forward_operator(require(root / "data" / "forward.bin", "simulate"));
}

fhn::Dataset load_native_data(const fs::path& root) {
    require(root / "data" / "native.bin", "simulate");
    return fhn::load_dataset(root / "data" / "native");
}

fhn::Dataset load_intv_data(const fs::path& root) {
    require(root / "data" / "intervention.bin", "simulate");
    return fhn::load_dataset(root / "data" / "intervention");
}

void check_counts(const RunConfig& c, const fhn::Dataset& native, const fhn::Dataset* intv) {
    if (static_cast<int>(native.size()) < c.native_count) {
        throw PreconditionError("native dataset holds " + std::to_string(native.size()) + " episodes, config needs " +
                                std::to_string(c.native_count));
    }
    if (intv && static_cast<int>(intv->size()) < c.intv_count()) {
        throw PreconditionError("intervention dataset holds " + std::to_string(intv->size()) +
                                " episodes, config needs " + std::to_string(c.intv_count()));
    }
}

std::string history_table(const model::TrainOutcome& out) {
    std::ostringstream os;
    os << "epoch\ttrain_loss\tval_loss\tlr\n";
    for (const auto& r : out.history) {
        os << r.epoch << '\t' << num(r.train_loss) << '\t' << num(r.val_loss) << '\t' << num(r.lr) << '\n';
    }
    return os.str();
}

std::string lr_table(const nn::LrRangeResult& r) {
    std::ostringstream os;
    os << "trial\tlr\tloss\tsmoothed\n";
    for (std::size_t i = 0; i < r.lrs.size(); ++i) {
        os << i << '\t' << num(r.lrs[i]) << '\t' << num(r.losses[i]) << '\t'
           << (i < r.smoothed.size() ? num(r.smoothed[i]) : std::string("nan")) << '\n';
    }
    return os.str();
}

void log_outcome(Stage& stage, const model::TrainOutcome& out) {
    if (out.lr_range) stage.write("lr_range.tsv", lr_table(*out.lr_range));
    stage.write("train_log.tsv", history_table(out));
    stage.log("base lr " + num(out.base_lr) + ", initial val loss " + num(out.initial_val_loss) + ", best val loss " +
              num(out.best_val_loss) + " at epoch " + std::to_string(out.best_epoch));
}

std::function<void(const model::EpochRecord&)> epoch_logger(Stage& stage) {
    return [&stage](const model::EpochRecord& r) {
        stage.log("epoch " + std::to_string(r.epoch) + " train " + num(r.train_loss) + " val " + num(r.val_loss) +
                  " lr " + num(r.lr));
    };
}

template <typename F>
std::vector<model::Reconstruction> chunked(std::span<const int> episodes, F&& fn) {
    std::vector<model::Reconstruction> out;
    for (std::size_t b = 0; b < episodes.size(); b += kInferenceChunk) {
        const auto n = std::min<std::size_t>(kInferenceChunk, episodes.size() - b);
        auto part = fn(episodes.subspan(b, n));
        for (auto& r : part) out.push_back(std::move(r));
    }
    return out;
}

/// Combined sequences of two sets (same grid, frames and electrodes).
model::SequenceSet concat(const model::SequenceSet& a, std::span<const int> ia, const model::SequenceSet& b,
                          std::span<const int> ib) {
    model::SequenceSet out;
    out.grid = a.grid;
    out.frames = a.frames;
    out.electrodes = a.electrodes;
    for (int i : ia) {
        out.x.push_back(a.x[static_cast<std::size_t>(i)]);
        out.y.push_back(a.y[static_cast<std::size_t>(i)]);
    }
    for (int i : ib) {
        out.x.push_back(b.x[static_cast<std::size_t>(i)]);
        out.y.push_back(b.y[static_cast<std::size_t>(i)]);
    }
    return out;
}

ObservationSequence observations(const model::SequenceSet& set, int episode) {
    ObservationSequence y(set.frames, set.electrodes);
    y.values = set.y[static_cast<std::size_t>(episode)];
    return y;
}

std::vector<double> lambda_grid(const RunConfig& c) {
    std::vector<double> out;
    if (c.lambda_steps == 1) return {c.lambda_min};
    const double l0 = std::log10(c.lambda_min), l1 = std::log10(c.lambda_max);
    for (int i = 0; i < c.lambda_steps; ++i) out.push_back(std::pow(10.0, l0 + (l1 - l0) * i / (c.lambda_steps - 1)));
    return out;
}

std::vector<eval::Detection> detect_all(const std::vector<VoltageSequence>& binary, int grid) {
    const auto cfg = eval::DetectorConfig::for_grid(grid);
    std::vector<eval::Detection> out;
    for (const auto& s : binary) out.push_back(eval::detect_foci(s, cfg));
    return out;
}

std::vector<VoltageSequence> thresholded(const std::vector<model::Reconstruction>& recon) {
    std::vector<VoltageSequence> out;
    for (const auto& r : recon) out.push_back(model::threshold(r.x_hat));
    return out;
}

std::vector<fhn::EpisodeMeta> metas_of(const fhn::Dataset& d, std::span<const int> episodes) {
    std::vector<fhn::EpisodeMeta> out;
    for (int e : episodes) out.push_back(d.metas.at(static_cast<std::size_t>(e)));
    return out;
}

std::vector<VoltageSequence> ecgi_all(const model::SequenceSet& set, std::span<const int> episodes,
                                      const obs::DenseMatrix& H, double lambda) {
    const obs::TikhonovSolver solver(H, obs::first_order_regularizer(set.grid, lambda));
    std::vector<VoltageSequence> out;
    for (int e : episodes) out.push_back(obs::ecgi_reconstruct(observations(set, e), solver, set.grid));
    return out;
}

/// Mean location error with misses counted as the domain diagonal.
double penalised_location_error(const eval::LocalizationReport& rep, double domain_mm) {
    double s = 0.0;
    for (const auto& r : rep.rows) s += r.found ? r.location_error_mm : domain_mm * std::sqrt(2.0);
    return s / static_cast<double>(rep.rows.size());
}

double read_lambda(const fs::path& root, const RunConfig& c, const StageOptions& o) {
    if (o.lambda) return *o.lambda;
    if (c.lambda > 0.0) return c.lambda;
    const auto text = io::read_bytes(require(root / "ecgi" / "lambda.txt", "ecgi"));
    double v = 0.0;
    std::istringstream(text) >> v;
    if (!(v > 0.0)) throw FormatError("ecgi/lambda.txt does not hold a positive lambda");
    return v;
}

std::string native_hash(const fs::path& path) { return io::sha256_hex(io::read_bytes(path)); }

// ---------------------------------------------------------------------------

void simulate(const RunConfig& c, const fs::path& root, const StageOptions& o) {
    Stage stage(root / "data", c, o);
    const auto params = fhn::default_params(c.grid);
    const auto gen = c.generator();
    auto native = fhn::generate_dataset(fhn::EpisodeKind::native, c.native_count, params, c.seed_native_data, gen);
    fhn::save_dataset(stage.dir() / "native", native);
    stage.log("native episodes: " + std::to_string(native.size()));
    auto intv = fhn::generate_dataset(fhn::EpisodeKind::intervention, c.intv_count(), params, c.seed_intv_data, gen);
    fhn::save_dataset(stage.dir() / "intervention", intv);
    stage.log("intervention episodes: " + std::to_string(intv.size()));
    obs::ElectrodeLayout layout;
    layout.rows = c.electrode_rows;
    layout.cols = c.electrode_cols;
    layout.height_mm = c.electrode_height_mm;
    obs::save_forward_operator(stage.dir() / "forward.bin", obs::build_forward_operator(c.grid, layout));
    stage.log("forward operator: " + std::to_string(layout.count()) + " electrodes at " +
              num(layout.height_mm) + " mm");
}

void lr_find(const RunConfig& c, const fs::path& root, const StageOptions& o) {
    const auto& which = o.lr_model;
    if (which != "native" && which != "intv" && which != "gru") {
        throw PreconditionError("lr-find: unknown model '" + which + "' (expected native, intv or gru)");
    }
    const auto op = load_operator(root);
    const auto native_data = load_native_data(root);
    check_counts(c, native_data, nullptr);
    const auto sp = make_splits(c);
    const auto tc = c.training(1, 0.0);
    nn::LrRangeResult res;
    if (which == "native") {
        const auto set = model::prepare_sequences(native_data, op.H);
        const auto m = model::NativeModel::create(c.native_model(), c.seed_model);
        const auto fn = model::with_dihedral_augmentation(
            [&](const model::SequenceSet& s) { return model::native_loss_fn(m, s); }, set, op.H);
        Stage stage(root / "lr-find" / which, c, o);
        res = model::find_learning_rate(fn, m.params, model::dihedral_ids(sp.native_train), tc);
        stage.write("lr_range.tsv", lr_table(res));
        stage.write("suggested_lr.txt", num(res.suggested_lr) + "\n");
        stage.log("suggested lr " + num(res.suggested_lr));
        return;
    }
    const auto intv_data = load_intv_data(root);
    check_counts(c, native_data, &intv_data);
    const auto iset = model::prepare_sequences(intv_data, op.H);
    if (which == "intv") {
        const auto ckpt = require(root / "native" / "model.ckpt", "train-native");
        const auto m = model::InterventionModel::from_native(model::load_native(ckpt), c.intervention_model(),
                                                             c.seed_model + 1, native_hash(ckpt));
        Stage stage(root / "lr-find" / which, c, o);
        res = model::find_learning_rate(model::intervention_loss_fn(m, op.H, iset), m.params, sp.intv_train, tc);
        stage.write("lr_range.tsv", lr_table(res));
        stage.write("suggested_lr.txt", num(res.suggested_lr) + "\n");
        stage.log("suggested lr " + num(res.suggested_lr));
        return;
    }
    const auto nset = model::prepare_sequences(native_data, op.H);
    const auto joint = concat(nset, sp.native_train, iset, sp.intv_train);
    const auto m = model::GruAblationModel::create(c.native_model(), c.gru_model(), c.seed_model + 2);
    Stage stage(root / "lr-find" / which, c, o);
    res = model::find_learning_rate(model::gru_loss_fn(m, joint), m.params, range(0, joint.size()), tc);
    stage.write("lr_range.tsv", lr_table(res));
    stage.write("suggested_lr.txt", num(res.suggested_lr) + "\n");
    stage.log("suggested lr " + num(res.suggested_lr));
}

void train_native(const RunConfig& c, const fs::path& root, const StageOptions& o) {
    const auto op = load_operator(root);
    const auto data = load_native_data(root);
    check_counts(c, data, nullptr);
    Stage stage(root / "native", c, o);
    const auto sp = make_splits(c);
    const auto set = model::prepare_sequences(data, op.H);
    const auto init = model::NativeModel::create(c.native_model(), c.seed_model);
    stage.log("parameters: " + std::to_string(init.params.parameter_count()));
    const auto fn = model::with_dihedral_augmentation(
        [&](const model::SequenceSet& s) { return model::native_loss_fn(init, s); }, set, op.H);
    const auto out = model::train_loop(init.params, fn, model::dihedral_ids(sp.native_train),
                                       model::dihedral_ids(sp.native_heldout),
                                       c.training(c.epochs_native, c.lr_native), epoch_logger(stage));
    log_outcome(stage, out);
    model::NativeModel best{init.config, out.best};
    model::save_native(stage.dir() / "model.ckpt", best, {{"best_epoch", std::to_string(out.best_epoch)}});
    if (out.diverged) throw DivergedError("train-native diverged (" + out.divergence_message + "); saved best checkpoint");
    const auto recon = chunked(sp.native_heldout, [&](std::span<const int> e) {
        return model::native_reconstruct(best, set, e);
    });
    stage.log("held-out mean per-frame Dice " + num(model::mean_dice(recon, set, sp.native_heldout)));
}

void train_intv(const RunConfig& c, const fs::path& root, const StageOptions& o) {
    const auto ckpt = require(root / "native" / "model.ckpt", "train-native");
    const auto op = load_operator(root);
    const auto data = load_intv_data(root);
    check_counts(c, load_native_data(root), &data);
    const auto native = model::load_native(ckpt);
    Stage stage(root / "intv", c, o);
    const auto sp = make_splits(c);
    const auto set = model::prepare_sequences(data, op.H);
    const auto init = model::InterventionModel::from_native(native, c.intervention_model(), c.seed_model + 1,
                                                            native_hash(ckpt));
    const auto frozen_before = init.params.frozen_hash();
    stage.log("stage-1 checkpoint sha256 " + init.native_sha256);
    stage.log("frozen-array sha256 before training " + frozen_before);
    const auto fn = model::intervention_loss_fn(init, op.H, set);
    const auto out = model::train_loop(init.params, fn, sp.intv_train, sp.intv_val,
                                       c.training(c.epochs_intv, c.lr_intv), epoch_logger(stage));
    log_outcome(stage, out);
    model::InterventionModel best{init.native_config, init.config, out.best, init.native_sha256};
    const auto frozen_after = best.params.frozen_hash();
    stage.log("frozen-array sha256 after training " + frozen_after);
    if (frozen_after != frozen_before) throw Error("train-intv: frozen native arrays changed during training");
    model::save_intervention(stage.dir() / "model.ckpt", best, {{"best_epoch", std::to_string(out.best_epoch)}});
    if (out.diverged) throw DivergedError("train-intv diverged (" + out.divergence_message + "); saved best checkpoint");
    const double native_val = model::evaluate_loss(model::native_loss_fn(native, set), native.params, sp.intv_val,
                                                   c.micro_batch);
    stage.log("validation loss of the native model on intervention episodes (native loss) " + num(native_val));
}

void train_gru(const RunConfig& c, const fs::path& root, const StageOptions& o) {
    const auto op = load_operator(root);
    const auto ndata = load_native_data(root);
    const auto idata = load_intv_data(root);
    check_counts(c, ndata, &idata);
    std::optional<model::NativeModel> warm;
    if (c.gru_warm_start) warm = model::load_native(require(root / "native" / "model.ckpt", "train-native"));
    Stage stage(root / "gru", c, o);
    const auto sp = make_splits(c);
    const auto nset = model::prepare_sequences(ndata, op.H);
    const auto iset = model::prepare_sequences(idata, op.H);
    const auto joint = concat(nset, sp.native_train, iset, sp.intv_train);
    const auto val = concat(nset, {}, iset, sp.intv_val);
    // Training and validation sets live in one SequenceSet so a single loss closure serves both.
    const auto all = concat(joint, range(0, joint.size()), val, range(0, val.size()));
    const auto train_ids = range(0, joint.size());
    const auto val_ids = range(joint.size(), val.size());
    const auto init = warm ? model::GruAblationModel::warm_start(*warm, c.gru_model(), c.seed_model + 2)
                           : model::GruAblationModel::create(c.native_model(), c.gru_model(), c.seed_model + 2);
    stage.log("joint training episodes: " + std::to_string(joint.size()) + (warm ? " (warm start)" : ""));
    const auto out = model::train_loop(init.params, model::gru_loss_fn(init, all), train_ids, val_ids,
                                       c.training(c.epochs_gru, c.lr_gru), epoch_logger(stage));
    log_outcome(stage, out);
    model::GruAblationModel best{init.native_config, init.config, out.best};
    model::save_gru_ablation(stage.dir() / "model.ckpt", best, {{"best_epoch", std::to_string(out.best_epoch)}});
    if (out.diverged) throw DivergedError("train-gru-ablation diverged (" + out.divergence_message + ")");
}

void ecgi(const RunConfig& c, const fs::path& root, const StageOptions& o) {
    const auto op = load_operator(root);
    const auto data = load_intv_data(root);
    Stage stage(root / "ecgi", c, o);
    const auto sp = make_splits(c);
    if (static_cast<int>(data.size()) < c.intv_count()) throw PreconditionError("ecgi: intervention dataset too small");
    const auto set = model::prepare_sequences(data, op.H);
    const double dx = 100.0 / c.grid;
    const auto metas = metas_of(data, sp.intv_val);
    std::ostringstream sweep;
    sweep << "lambda\tpct_identified\ttimestep_mae\tlocation_error_mm\tpenalised_location_error_mm\n";
    double chosen = 0.0;
    if (o.lambda || c.lambda > 0.0) {
        chosen = o.lambda ? *o.lambda : c.lambda;
        stage.log("lambda fixed by configuration: " + num(chosen));
    } else {
        double best = std::numeric_limits<double>::infinity();
        for (double lambda : lambda_grid(c)) {
            const auto det = detect_all(ecgi_all(set, sp.intv_val, op.H, lambda), c.grid);
            const auto rep = eval::localization_metrics(det, metas, dx, "ECGI");
            const double score = penalised_location_error(rep, 100.0);
            sweep << num(lambda) << '\t' << num(rep.pct_identified) << '\t' << num(rep.timestep_mae) << '\t'
                  << num(rep.location_error_mm) << '\t' << num(score) << '\n';
            stage.log("lambda " + num(lambda) + ": found " + num(rep.pct_identified) + ", penalised location error " +
                      num(score) + " mm");
            if (score < best) {
                best = score;
                chosen = lambda;
            }
        }
        stage.write("lambda_sweep.tsv", sweep.str());
    }
    stage.write("lambda.txt", num(chosen) + "\n");
    stage.log("selected lambda " + num(chosen));
}

void evaluate(const RunConfig& c, const fs::path& root, const StageOptions& o) {
    const auto native_ckpt = require(root / "native" / "model.ckpt", "train-native");
    const auto intv_ckpt = require(root / "intv" / "model.ckpt", "train-intv");
    const double lambda = read_lambda(root, c, o);
    const auto op = load_operator(root);
    const auto data = load_intv_data(root);
    const auto native = model::load_native(native_ckpt);
    const auto intv = model::load_intervention(intv_ckpt, native_ckpt);
    std::optional<model::GruAblationModel> gru;
    if (fs::exists(root / "gru" / "model.ckpt")) gru = model::load_gru_ablation(root / "gru" / "model.ckpt");
    Stage stage(root / "eval", c, o);
    const auto sp = make_splits(c);
    const auto set = model::prepare_sequences(data, op.H);
    const auto metas = metas_of(data, sp.intv_test);
    const double dx = 100.0 / c.grid;
    std::vector<eval::LocalizationReport> reports;
    std::ostringstream dice;
    dice << "model\tmean_frame_dice\n";
    auto score = [&](const std::string& name, const std::vector<VoltageSequence>& binary) {
        auto rep = eval::localization_metrics(detect_all(binary, c.grid), metas, dx, name);
        stage.write(name + "_episodes.tsv", eval::format_episode_rows(rep));
        double d = 0.0;
        for (std::size_t i = 0; i < binary.size(); ++i) {
            d += model::mean_frame_dice(binary[i], model::binary_sequence(set, sp.intv_test[i]));
        }
        dice << name << '\t' << num(d / static_cast<double>(binary.size())) << '\n';
        stage.log(name + ": identified " + num(rep.pct_identified) + ", onset MAE " + num(rep.timestep_mae) +
                  ", location error " + num(rep.location_error_mm) + " mm");
        reports.push_back(std::move(rep));
    };
    std::vector<VoltageSequence> truth;
    for (int e : sp.intv_test) truth.push_back(model::binary_sequence(set, e));
    score("ground-truth", truth);
    score("ECGI", ecgi_all(set, sp.intv_test, op.H, lambda));
    score("ODE-VAE", thresholded(chunked(sp.intv_test, [&](std::span<const int> e) {
        return model::native_reconstruct(native, set, e);
    })));
    if (gru) {
        score("ODE-VAE-GRU", thresholded(chunked(sp.intv_test, [&](std::span<const int> e) {
            return model::gru_baseline_filter(*gru, set, e);
        })));
    } else {
        stage.log("no GRU-ablation checkpoint; ODE-VAE-GRU row omitted");
    }
    score("ODE-VAE-IM", thresholded(chunked(sp.intv_test, [&](std::span<const int> e) {
        return model::filter_sequence(intv, op.H, set, e);
    })));
    stage.write("report.tsv", eval::format_report_table(reports));
    stage.write("dice.tsv", dice.str());
}

void render(const RunConfig& c, const fs::path& root, const StageOptions& o) {
    const auto native_ckpt = require(root / "native" / "model.ckpt", "train-native");
    const auto intv_ckpt = require(root / "intv" / "model.ckpt", "train-intv");
    const auto op = load_operator(root);
    const auto data = load_intv_data(root);
    const auto native = model::load_native(native_ckpt);
    const auto intv = model::load_intervention(intv_ckpt, native_ckpt);
    std::optional<double> lambda;
    if (o.lambda || c.lambda > 0.0 || fs::exists(root / "ecgi" / "lambda.txt")) lambda = read_lambda(root, c, o);
    std::optional<model::GruAblationModel> gru;
    if (fs::exists(root / "gru" / "model.ckpt")) gru = model::load_gru_ablation(root / "gru" / "model.ckpt");
    Stage stage(root / "render", c, o);
    const auto sp = make_splits(c);
    const auto set = model::prepare_sequences(data, op.H);
    const int n = std::min<int>(c.render_episodes, static_cast<int>(sp.intv_test.size()));
    const std::span<const int> eps(sp.intv_test.data(), static_cast<std::size_t>(n));
    const auto ode_vae = model::native_reconstruct(native, set, eps);
    const auto im = model::filter_sequence(intv, op.H, set, eps);
    std::vector<model::Reconstruction> gr;
    if (gru) gr = model::gru_baseline_filter(*gru, set, eps);
    for (int i = 0; i < n; ++i) {
        const int e = eps[static_cast<std::size_t>(i)];
        std::vector<eval::LabeledSequence> rows;
        rows.emplace_back("ground truth", model::binary_sequence(set, e));
        if (lambda) rows.emplace_back("ECGI", ecgi_all(set, std::span<const int>(&e, 1), op.H, *lambda).front());
        rows.emplace_back("ODE-VAE", ode_vae[static_cast<std::size_t>(i)].x_hat);
        if (gru) rows.emplace_back("ODE-VAE-GRU", gr[static_cast<std::size_t>(i)].x_hat);
        rows.emplace_back("ODE-VAE-IM", im[static_cast<std::size_t>(i)].x_hat);
        const auto name = "episode_" + std::to_string(data.metas[static_cast<std::size_t>(e)].index) + ".pgm";
        eval::write_pgm(stage.dir() / name, eval::render_panels(rows, c.render_stride));
        stage.log("wrote " + name);
    }
}

void diagnose_latents(const RunConfig& c, const fs::path& root, const StageOptions& o) {
    const auto native_ckpt = require(root / "native" / "model.ckpt", "train-native");
    const auto intv_ckpt = require(root / "intv" / "model.ckpt", "train-intv");
    const auto op = load_operator(root);
    const auto data = load_intv_data(root);
    const auto intv = model::load_intervention(intv_ckpt, native_ckpt);
    Stage stage(root / "latents", c, o);
    const auto sp = make_splits(c);
    const auto set = model::prepare_sequences(data, op.H);
    const auto recon = chunked(sp.intv_test, [&](std::span<const int> e) {
        return model::filter_sequence(intv, op.H, set, e);
    });
    std::ostringstream curves, summary;
    curves << "episode\tframe\tz_norm\ta_norm\n";
    summary << "episode\tonset_frame\ta_rises\n";
    int hits = 0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        const auto& meta = data.metas[static_cast<std::size_t>(sp.intv_test[i])];
        const auto [zc, ac] = eval::latent_norm_curves(recon[i].latents);
        for (std::size_t f = 0; f < zc.size(); ++f) {
            curves << meta.index << '\t' << f << '\t' << num(zc[f]) << '\t' << num(ac[f]) << '\n';
        }
        const bool rises = eval::onset_signal_rises(ac, meta.foci_stim->onset_frame);
        hits += rises ? 1 : 0;
        summary << meta.index << '\t' << meta.foci_stim->onset_frame << '\t' << (rises ? 1 : 0) << '\n';
    }
    stage.write("curves.tsv", curves.str());
    stage.write("summary.tsv", summary.str());
    stage.log("intervention-norm rise after onset in " + std::to_string(hits) + " of " +
              std::to_string(recon.size()) + " episodes");
}

} // namespace

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"simulate", "lr-find", "train-native", "train-intv",
                                                   "train-gru-ablation", "ecgi", "eval", "render",
                                                   "diagnose-latents"};
    return names;
}

Splits make_splits(const RunConfig& c) {
    Splits s;
    s.native_train = range(0, c.native_train);
    s.native_heldout = range(c.native_train, c.native_count - c.native_train);
    s.intv_train = range(0, c.intv_train);
    s.intv_val = range(c.intv_train, c.intv_val);
    s.intv_test = range(c.intv_train + c.intv_val, c.intv_test);
    return s;
}

void run_stage(std::string_view name, const RunConfig& config, const fs::path& root, const StageOptions& options) {
    config.validate();
    if (name == "simulate") return simulate(config, root, options);
    if (name == "lr-find") return lr_find(config, root, options);
    if (name == "train-native") return train_native(config, root, options);
    if (name == "train-intv") return train_intv(config, root, options);
    if (name == "train-gru-ablation") return train_gru(config, root, options);
    if (name == "ecgi") return ecgi(config, root, options);
    if (name == "eval") return evaluate(config, root, options);
    if (name == "render") return render(config, root, options);
    if (name == "diagnose-latents") return diagnose_latents(config, root, options);
    throw PreconditionError("unknown stage '" + std::string(name) + "'");
}

void run_pipeline(const RunConfig& config, const fs::path& root, const StageOptions& options) {
    for (const char* s : {"simulate", "train-native", "train-intv", "train-gru-ablation", "ecgi", "eval"}) {
        run_stage(s, config, root, options);
    }
}

} // namespace cessm::app
