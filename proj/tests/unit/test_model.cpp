// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "cessm/errors.hpp"
#include "cessm/io/container.hpp"
#include "cessm/io/sha256.hpp"
#include "cessm/model/gru_ablation.hpp"
#include "cessm/model/intervention.hpp"
#include "cessm/model/native.hpp"
#include "cessm/model/training.hpp"
#include "cessm/nn/ops.hpp"
#include "../support/fixtures.hpp"
#include "../support/gradcheck.hpp"

using namespace cessm;
using namespace cessm::model;
using cessm::testing::gradcheck_params;
using cessm::testing::miniature;

namespace {

constexpr double kTol = 1e-4;

// Scales the zero-initialised F_a output layer up so every path carries gradient.
void wake_f_a(nn::ParamSet& ps) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (auto& a : ps.arrays())
        if (a.name.rfind("f_a.", 0) == 0)
            for (auto& v : a.values)
                if (v == 0.0) v = u(rng);
}

std::vector<int> all_episodes(const SequenceSet& s) {
    std::vector<int> v(static_cast<std::size_t>(s.size()));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("native architecture shapes") {
    const auto m = NativeModel::create(NativeConfig{}, 1);
    CHECK(m.params.parameter_count() > 10000);
    CHECK(m.params.parameter_count() < 100000);
    const auto mini = miniature();
    const auto small = NativeModel::create(mini.native, 1);
    nn::Tape tape;
    nn::Binding p(tape, small.params, nn::GradMode::none);
    const auto net = small.net();
    const std::vector<int> eps{0, 1};
    auto z0 = net.encode(p, tape.constant({2, 3 * 4}, observation_window(mini.set, eps, 0, 3)));
    CHECK(z0.shape() == nn::Shape{2, 4});
    auto x = net.decode(p, z0);
    CHECK(x.shape() == nn::Shape{2, 64});
    for (double v : x.value()) CHECK((v > 0.0 && v < 1.0));
    NativeConfig bad = mini.native;
    bad.grid = 12;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
}

TEST_CASE("native loss weights the first frame by beta and averages the rest") {
    nn::Tape tape;
    const int B = 2, F = 3, P = 2;
    const auto pv = cessm::testing::random_values(B * F * P, 3, 0.1, 0.9);
    const std::vector<double> t{1, 0, 0, 1, 1, 1, 0, 0, 1, 0, 0, 1};
    auto pred = tape.constant({B * F, P}, pv);
    const double beta = 5.0;
    auto row_bce = [&](int r) {
        double s = 0;
        for (int j = 0; j < P; ++j) {
            const double q = pv[r * P + j], y = t[r * P + j];
            s -= y * std::log(q) + (1 - y) * std::log(1 - q);
        }
        return s / P;
    };
    double expect = 0, expect_intv = 0;
    for (int b = 0; b < B; ++b) {
        double e = beta * row_bce(0 * B + b);
        for (int f = 1; f < F; ++f) e += row_bce(f * B + b) / (F - 1);
        expect += e / B;
        for (int f = 0; f < F; ++f) expect_intv += row_bce(f * B + b) / (B * F);
    }
    CHECK(loss_native(pred, t, B, F, beta).item() == doctest::Approx(expect).epsilon(1e-13));
    CHECK(loss_intv(pred, t, B, F).item() == doctest::Approx(expect_intv).epsilon(1e-13));
    CHECK_THROWS_AS(loss_native(pred, t, 3, F, beta), ShapeError);
}

TEST_CASE("observation windows are zero-padded past the end") {
    const auto mini = miniature();
    const std::vector<int> eps{1};
    const auto w = observation_window(mini.set, eps, 5, 4);
    const int M = 4;
    for (int j = 0; j < 4; ++j)
        for (int m = 0; m < M; ++m) {
            const int f = 5 + j;
            const double expect = f < 7 ? mini.set.y[1][f * M + m] : 0.0;
            CHECK(w[j * M + m] == expect);
        }
}

TEST_CASE("the composed native model passes a gradient check") {
    const auto mini = miniature();
    const auto m = NativeModel::create(mini.native, 2);
    const std::vector<int> eps{0, 1};
    const auto target = frame_major_targets(mini.set, eps);
    auto r = gradcheck_params(m.params, [&](const nn::Binding& p) {
        const auto net = m.net();
        auto pred = native_forward(net, p, mini.set, eps);
        return loss_native(pred, target, 2, mini.set.frames, mini.native.beta);
    });
    CHECK(r.checked > 50);
    CHECK_MESSAGE(r.max_rel_error < kTol, r.worst);
}

TEST_CASE("the composed intervention model passes a gradient check") {
    const auto mini = miniature();
    auto m = InterventionModel::from_native(NativeModel::create(mini.native, 3), mini.intv, 4);
    wake_f_a(m.params);
    const std::vector<int> eps{0, 1};
    const auto target = frame_major_targets(mini.set, eps);
    auto loss = [&](const nn::Binding& p) {
        auto& tape = p.tape();
        auto H = tape.constant({mini.op.H.rows, mini.op.H.cols}, mini.op.H.data);
        auto g = filter_forward(m.net(), p, H, mini.set, eps);
        return loss_intv(g.x_hat, target, 2, mini.set.frames);
    };
    SUBCASE("stage-2 arrays") {
        auto r = gradcheck_params(m.params, loss);
        CHECK(r.checked > 30);
        CHECK_MESSAGE(r.max_rel_error < kTol, r.worst);
    }
    SUBCASE("every array, through the frozen native path") {
        auto all = m.params;
        all.set_trainable("", true);
        auto r = gradcheck_params(all, loss, 3);
        CHECK_MESSAGE(r.max_rel_error < kTol, r.worst);
    }
}

TEST_CASE("the GRU ablation passes a gradient check") {
    const auto mini = miniature();
    GruAblationConfig gc;
    gc.window = 2;
    gc.enc_hidden = 6;
    gc.enc_layers = 1;
    const auto m = GruAblationModel::create(mini.native, gc, 5);
    const std::vector<int> eps{0, 2};
    const auto target = frame_major_targets(mini.set, eps);
    auto r = gradcheck_params(m.params, [&](const nn::Binding& p) {
        auto g = gru_forward(m.net(), p, mini.set, eps);
        return loss_intv(g.x_hat, target, 2, mini.set.frames);
    }, 4);
    CHECK_MESSAGE(r.max_rel_error < kTol, r.worst);
}

TEST_CASE("native reconstruction reads only the first k observation frames") {
    const auto mini = miniature();
    const auto m = NativeModel::create(mini.native, 6);
    auto corrupted = mini.set;
    const int k = mini.native.k, M = mini.set.electrodes;
    for (auto& y : corrupted.y)
        for (std::size_t i = static_cast<std::size_t>(k) * M; i < y.size(); ++i) y[i] = 1e3 * std::sin(double(i));
    const auto eps = all_episodes(mini.set);
    const auto a = native_reconstruct(m, mini.set, eps);
    const auto b = native_reconstruct(m, corrupted, eps);
    for (std::size_t e = 0; e < eps.size(); ++e) {
        CHECK(a[e].x_hat.values == b[e].x_hat.values);
        CHECK(a[e].latents.z == b[e].latents.z);
    }
}

TEST_CASE("a batch row's reconstruction does not depend on its batch mates") {
    const auto mini = miniature(4);
    const auto m = NativeModel::create(mini.native, 7);
    const std::vector<int> all{0, 1, 2, 3}, one{2};
    const auto a = native_reconstruct(m, mini.set, all);
    const auto b = native_reconstruct(m, mini.set, one);
    CHECK(a[2].x_hat.values == b[0].x_hat.values);
    const auto im = InterventionModel::from_native(m, mini.intv, 8);
    const auto fa = filter_sequence(im, mini.op.H, mini.set, all);
    const auto fb = filter_sequence(im, mini.op.H, mini.set, one);
    CHECK(fa[2].x_hat.values == fb[0].x_hat.values);
    CHECK(fa[2].latents.a == fb[0].latents.a);
}

TEST_CASE("zero coupling reproduces the native rollout bit for bit") {
    const auto mini = miniature();
    const auto native = NativeModel::create(mini.native, 9);
    const auto im = InterventionModel::from_native(native, mini.intv, 10);
    const auto last = "f_a." + std::to_string(mini.intv.ode_layers);
    for (double v : im.params.at(last + ".weight").values) CHECK(v == 0.0);
    for (double v : im.params.at(last + ".bias").values) CHECK(v == 0.0);
    const auto eps = all_episodes(mini.set);
    const auto n = native_reconstruct(native, mini.set, eps);
    const auto f = filter_sequence(im, mini.op.H, mini.set, eps);
    for (std::size_t e = 0; e < eps.size(); ++e) {
        CHECK(n[e].x_hat.values == f[e].x_hat.values);
        CHECK(n[e].latents.z == f[e].latents.z);
        CHECK(f[e].latents.has_a());
    }
}

TEST_CASE("residual stacks match |H x - y| with zero padding") {
    obs::DenseMatrix H(2, 3);
    H.data = {1, 0, 2, -1, 1, 0};
    const std::vector<double> x{1, 2, 3, 0, 1, 1};
    const std::vector<double> y{5, 0, 4, 4};
    const auto r = residual_sequence(H, x, y, 3);
    const std::vector<double> expect{std::abs(7.0 - 5), std::abs(1.0 - 0), std::abs(2.0 - 4), std::abs(1.0 - 4), 0, 0};
    CHECK(r == expect);
    CHECK_THROWS_AS(residual_sequence(H, x, y, 1), ShapeError);
}

TEST_CASE("filter residuals equal the hypothetical-rollout residuals") {
    const auto mini = miniature();
    const auto im = InterventionModel::from_native(NativeModel::create(mini.native, 11), mini.intv, 12);
    const std::vector<int> eps{1};
    nn::Tape tape;
    nn::Binding p(tape, im.params, nn::GradMode::none);
    const auto net = im.net();
    auto H = tape.constant({mini.op.H.rows, mini.op.H.cols}, mini.op.H.data);
    auto g = filter_forward(net, p, H, mini.set, eps);
    const int T = mini.set.horizon(), M = mini.set.electrodes, P = mini.set.pixels(), w = mini.intv.window;
    REQUIRE(static_cast<int>(g.residual.size()) == T);
    for (int i = 1; i <= T; ++i) {
        const int avail = std::min(w, T - i + 1);
        auto decoded = net.hypothetical_rollout(p, g.z[i - 1], avail);
        std::vector<double> y(mini.set.y[1].begin() + static_cast<long>(i) * M,
                              mini.set.y[1].begin() + static_cast<long>(i + avail) * M);
        const auto expect = residual_sequence(mini.op.H, decoded.value().subspan(0, avail * P), y, w);
        const auto got = g.residual[i - 1].value();
        for (int j = 0; j < w * M; ++j) CHECK(got[j] == doctest::Approx(expect[j]).epsilon(1e-12));
    }
}

TEST_CASE("a stage-2 step leaves the frozen native arrays untouched") {
    const auto mini = miniature();
    const auto im = InterventionModel::from_native(NativeModel::create(mini.native, 13), mini.intv, 14);
    const auto before = im.params.frozen_hash();
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch = 2;
    tc.micro_batch = 1;
    tc.lr = 1e-2;
    const std::vector<int> train{0, 1}, val{2};
    const auto out = train_loop(im.params, intervention_loss_fn(im, mini.op.H, mini.set), train, val, tc);
    CHECK(out.best.frozen_hash() == before);
    CHECK(out.history.size() == 2);
    bool moved = false;
    for (std::size_t a = 0; a < im.params.size(); ++a)
        moved = moved || out.best.arrays()[a].values != im.params.arrays()[a].values;
    CHECK(moved == (out.best_epoch >= 0));
}

TEST_CASE("accumulated micro-batches equal the full-batch loss and gradient") {
    const auto mini = miniature(4);
    const auto m = NativeModel::create(mini.native, 15);
    const auto fn = native_loss_fn(m, mini.set);
    const std::vector<int> eps{0, 1, 2, 3};
    auto g1 = nn::zero_gradients(m.params), g2 = nn::zero_gradients(m.params);
    const double l1 = accumulate_loss(fn, m.params, eps, 4, &g1);
    const double l2 = accumulate_loss(fn, m.params, eps, 1, &g2);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    for (std::size_t a = 0; a < g1.size(); ++a)
        for (std::size_t i = 0; i < g1[a].size(); ++i) CHECK(g1[a][i] == doctest::Approx(g2[a][i]).epsilon(1e-9));
}

TEST_CASE("training is deterministic and keeps the best validation parameters") {
    const auto mini = miniature(4);
    const auto m = NativeModel::create(mini.native, 16);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch = 2;
    tc.micro_batch = 2;
    tc.lr = 5e-3;
    const std::vector<int> train{0, 1, 2}, val{3};
    const auto fn = native_loss_fn(m, mini.set);
    const auto a = train_loop(m.params, fn, train, val, tc);
    const auto b = train_loop(m.params, fn, train, val, tc);
    CHECK(a.best.hash([](const nn::ParamArray&) { return true; }) ==
          b.best.hash([](const nn::ParamArray&) { return true; }));
    double best = a.initial_val_loss;
    for (const auto& r : a.history) best = std::min(best, r.val_loss);
    CHECK(a.best_val_loss == best);
    CHECK(evaluate_loss(fn, a.best, val, 1) == doctest::Approx(a.best_val_loss).epsilon(1e-12));
}

TEST_CASE("a non-finite loss ends training with the best parameters so far") {
    const auto mini = miniature();
    const auto m = NativeModel::create(mini.native, 17);
    int calls = 0;
    const auto base = native_loss_fn(m, mini.set);
    model::BatchLossFn fn = [&](const nn::ParamSet& ps, std::span<const int> e, nn::Gradients* g, double w) {
        if (g && ++calls > 1) throw DivergedError("synthetic blow-up");
        return base(ps, e, g, w);
    };
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch = 1;
    tc.micro_batch = 1;
    tc.lr = 1e-3;
    const std::vector<int> train{0, 1}, val{2};
    const auto out = train_loop(m.params, fn, train, val, tc);
    CHECK(out.diverged);
    CHECK(out.divergence_message.find("synthetic") != std::string::npos);
    CHECK(out.best.all_finite());
}

TEST_CASE("the symmetries of the square form a group acting on sequences") {
    const auto xs = cessm::testing::disc_sequences(1, 2, 6, 3);
    const auto& x = xs[0];
    CHECK(dihedral(x, 0) == x);
    std::set<std::vector<double>> images;
    for (int t = 0; t < 8; ++t) {
        const auto y = dihedral(x, t);
        images.insert(y.values);
        double sx = std::accumulate(x.values.begin(), x.values.end(), 0.0);
        double sy = std::accumulate(y.values.begin(), y.values.end(), 0.0);
        CHECK(sx == sy);
        // Pure flips (no transpose) are involutions.
        if (t < 4) CHECK(dihedral(y, t) == x);
    }
    CHECK(images.size() == 8);
    CHECK_THROWS_AS(dihedral(x, 8), PreconditionError);
}

TEST_CASE("augmented selections recompute observations through H") {
    const auto mini = miniature(2);
    const std::vector<int> ids{1 * 8 + 5, 0 * 8 + 0};
    const auto sel = select_episodes(mini.set, ids, mini.op.H, true);
    REQUIRE(sel.size() == 2);
    const auto expect = obs::observe(mini.op.H, dihedral(binary_sequence(mini.set, 1), 5));
    CHECK(sel.y[0] == expect.values);
    CHECK(sel.x[1] == mini.set.x[0]);
    CHECK(dihedral_ids(std::vector<int>{3}).size() == 8);
}

TEST_CASE("Dice follows its definition") {
    const std::vector<double> a{1, 1, 0, 0}, b{1, 0, 1, 0}, z{0, 0, 0, 0};
    CHECK(dice(a, b) == doctest::Approx(0.5));
    CHECK(dice(a, a) == 1.0);
    CHECK(dice(z, z) == 1.0);
    CHECK(dice(a, z) == 0.0);
}

TEST_CASE("checkpoints round-trip and stage-2 loading verifies its stage-1 file") {
    cessm::testing::TempDir dir("model");
    const auto mini = miniature();
    const auto native = NativeModel::create(mini.native, 18);
    save_native(dir.path() / "native.ckpt", native);
    const auto back = load_native(dir.path() / "native.ckpt");
    CHECK(back.config == native.config);
    const auto hash = io::sha256_hex(io::read_bytes(dir.path() / "native.ckpt"));
    auto im = InterventionModel::from_native(back, mini.intv, 19, hash);
    save_intervention(dir.path() / "intv.ckpt", im);
    const auto im2 = load_intervention(dir.path() / "intv.ckpt", dir.path() / "native.ckpt");
    CHECK(im2.config == im.config);
    CHECK(im2.native_sha256 == hash);
    CHECK(im2.params.frozen_hash() == im.params.frozen_hash());
    // A different stage-1 file is refused.
    save_native(dir.path() / "other.ckpt", NativeModel::create(mini.native, 20));
    CHECK_THROWS(load_intervention(dir.path() / "intv.ckpt", dir.path() / "other.ckpt"));
    CHECK_THROWS(save_native(dir.path() / "native.ckpt", native));
    CHECK_THROWS(load_native(dir.path() / "intv.ckpt"));
    GruAblationConfig gc;
    gc.window = 2;
    gc.enc_hidden = 5;
    gc.enc_layers = 1;
    const auto gm = GruAblationModel::create(mini.native, gc, 21);
    save_gru_ablation(dir.path() / "gru.ckpt", gm);
    CHECK(load_gru_ablation(dir.path() / "gru.ckpt").config == gc);
    const auto warm = GruAblationModel::warm_start(back, gc, 22);
    CHECK(warm.params.at("f_z.0.weight").values == back.params.at("f_z.0.weight").values);
}

} // TEST_SUITE
