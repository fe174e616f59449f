// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include "cessm/fhn/dataset.hpp"
#include "cessm/fhn/simulator.hpp"
#include "cessm/model/native.hpp"
#include "cessm/nn/gemm.hpp"
#include "cessm/obs/forward_operator.hpp"
#include "cessm/obs/tikhonov.hpp"

using namespace cessm;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

void BM_FhnStep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto p = fhn::default_params(n);
    fhn::GridState s(n);
    s.v = noise(s.v.size(), 1);
    std::vector<double> stim(s.v.size(), 0.0), scratch(s.v.size());
    for (auto _ : state) {
        fhn::fhn_step_inplace(s, p, stim, scratch);
        benchmark::DoNotOptimize(s.v.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_FhnStep)->Arg(32)->Arg(64)->Arg(128);

void BM_SimulateEpisode(benchmark::State& state) {
    const auto p = fhn::default_params(32);
    fhn::GeneratorConfig g;
    const auto meta = fhn::sample_episode(fhn::EpisodeKind::intervention, 0, 7, p, g);
    for (auto _ : state) benchmark::DoNotOptimize(fhn::simulate_episode(meta, p));
}
BENCHMARK(BM_SimulateEpisode)->Unit(benchmark::kMillisecond);

void BM_Gemm(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = noise(static_cast<std::size_t>(n) * n, 2);
    const auto b = noise(static_cast<std::size_t>(n) * n, 3);
    std::vector<double> c(a.size());
    for (auto _ : state) {
        nn::gemm::nn(n, n, n, a.data(), b.data(), c.data());
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2L * n * n * n);
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(256);

void BM_TikhonovFactor(benchmark::State& state) {
    const auto op = obs::build_forward_operator(32, obs::ElectrodeLayout{});
    const auto reg = obs::first_order_regularizer(32, 1e-2);
    for (auto _ : state) benchmark::DoNotOptimize(obs::TikhonovSolver(op.H, reg));
}
BENCHMARK(BM_TikhonovFactor)->Unit(benchmark::kMillisecond);

void BM_TikhonovSolve(benchmark::State& state) {
    const auto op = obs::build_forward_operator(32, obs::ElectrodeLayout{});
    const obs::TikhonovSolver solver(op.H, obs::first_order_regularizer(32, 1e-2));
    const auto y = noise(static_cast<std::size_t>(op.electrodes()), 4);
    for (auto _ : state) benchmark::DoNotOptimize(solver.solve(y));
}
BENCHMARK(BM_TikhonovSolve)->Unit(benchmark::kMicrosecond);

// One native training step (forward and backward) per batch size.
void BM_NativeBatch(benchmark::State& state) {
    model::NativeConfig cfg;
    const auto m = model::NativeModel::create(cfg, 1);
    const auto op = obs::build_forward_operator(cfg.grid, obs::ElectrodeLayout{});
    const auto p = fhn::default_params(cfg.grid);
    fhn::GeneratorConfig g;
    g.frames = 20;
    const auto data = fhn::generate_dataset(fhn::EpisodeKind::native, 8, p, 9, g);
    const auto set = model::prepare_sequences(data, op.H);
    std::vector<int> eps(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = static_cast<int>(i % 8);
    for (auto _ : state) {
        auto grads = nn::zero_gradients(m.params);
        benchmark::DoNotOptimize(model::native_batch_loss(m, set, eps, &grads));
    }
}
BENCHMARK(BM_NativeBatch)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
