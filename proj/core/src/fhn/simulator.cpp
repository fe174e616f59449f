// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/fhn/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cessm::fhn {

void FhnParams::validate() const {
    if (!(dt > 0.0) || !(dx > 0.0)) throw PreconditionError("fhn: dt and dx must be positive");
    if (diffusion < 0.0) throw PreconditionError("fhn: diffusion must be non-negative");
    if (save_every < 1) throw PreconditionError("fhn: save_every must be >= 1");
    if (diffusion > 0.0 && dt > dx * dx / (4.0 * diffusion)) {
        throw PreconditionError("fhn: dt=" + std::to_string(dt) + " violates the stability bound dx^2/(4D)=" +
                                std::to_string(dx * dx / (4.0 * diffusion)));
    }
}

FhnParams default_params(int grid) {
    if (grid < 2) throw PreconditionError("fhn: grid must be >= 2");
    FhnParams p;
    p.dx = 100.0 / grid;
    const double frame_time = 2.0;
    const double bound = p.dx * p.dx / (4.0 * p.diffusion);
    int steps = 20;
    while (frame_time / steps > 0.9 * bound) steps *= 2;
    p.save_every = steps;
    p.dt = frame_time / steps;
    return p;
}

void EpisodeMeta::validate() const {
    auto check = [&](const StimulusEvent& s, const char* what) {
        if (s.row < 0 || s.row >= grid || s.col < 0 || s.col >= grid) {
            throw PreconditionError(std::string("episode meta: ") + what + " centre outside the grid");
        }
        if (s.onset_frame < 0) throw PreconditionError(std::string("episode meta: ") + what + " onset < 0");
        if (s.duration_frames < 1) throw PreconditionError(std::string("episode meta: ") + what + " duration < 1");
    };
    if (grid < 2 || frames < 1) throw PreconditionError("episode meta: grid >= 2 and frames >= 1 required");
    check(initial_stim, "initial stimulus");
    if (second_stim) check(*second_stim, "second stimulus");
    if (foci_stim) check(*foci_stim, "foci stimulus");
}

void stimulus_field(const EpisodeMeta& meta, int frame, std::span<double> field) {
    const int n = meta.grid;
    auto add = [&](const StimulusEvent& s) {
        if (!s.active_in_frame(frame)) return;
        const int reach = static_cast<int>(std::ceil(s.radius));
        for (int r = std::max(0, s.row - reach); r <= std::min(n - 1, s.row + reach); ++r) {
            for (int c = std::max(0, s.col - reach); c <= std::min(n - 1, s.col + reach); ++c) {
                if (s.covers(r, c)) field[static_cast<std::size_t>(r) * n + c] += s.amplitude;
            }
        }
    };
    add(meta.initial_stim);
    if (meta.second_stim) add(*meta.second_stim);
    if (meta.foci_stim) add(*meta.foci_stim);
}

void fhn_step_inplace(GridState& state, const FhnParams& params, std::span<const double> stim_field,
                      std::span<double> scratch, long step_index) {
    const int n = state.grid;
    const double coupling = params.diffusion / (params.dx * params.dx);
    auto& v = state.v;
    auto& w = state.w;
    bool finite = true;
    for (int r = 0; r < n; ++r) {
        const int up = r > 0 ? r - 1 : r;
        const int down = r < n - 1 ? r + 1 : r;
        for (int c = 0; c < n; ++c) {
            const int left = c > 0 ? c - 1 : c;
            const int right = c < n - 1 ? c + 1 : c;
            const std::size_t i = static_cast<std::size_t>(r) * n + c;
            const double vi = v[i];
            const double lap = v[static_cast<std::size_t>(up) * n + c] + v[static_cast<std::size_t>(down) * n + c] +
                               v[static_cast<std::size_t>(r) * n + left] + v[static_cast<std::size_t>(r) * n + right] -
                               4.0 * vi;
            const double reaction = vi * (vi - params.a_exc) * (1.0 - vi);
            const double dv = coupling * lap + reaction - w[i] + stim_field[i];
            const double dw = params.eps * (vi - params.gamma * w[i]);
            scratch[i] = vi + params.dt * dv;
            w[i] += params.dt * dw;
            finite = finite && std::isfinite(scratch[i]) && std::isfinite(w[i]);
        }
    }
    std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(v.size()), v.begin());
    if (!finite) {
        throw DivergedError("fhn: simulation diverged (non-finite state) at step " + std::to_string(step_index));
    }
}

GridState fhn_step(const GridState& state, const FhnParams& params, std::span<const double> stim_field,
                   long step_index) {
    const std::size_t cells = static_cast<std::size_t>(state.grid) * state.grid;
    if (state.v.size() != cells || state.w.size() != cells || stim_field.size() != cells) {
        throw ShapeError("fhn_step: state or stimulus size does not match grid");
    }
    for (std::size_t i = 0; i < cells; ++i) {
        if (!std::isfinite(state.v[i]) || !std::isfinite(state.w[i])) {
            throw DivergedError("fhn_step: non-finite input state at step " + std::to_string(step_index));
        }
    }
    GridState next = state;
    std::vector<double> scratch(cells);
    fhn_step_inplace(next, params, stim_field, scratch, step_index);
    return next;
}

VoltageSequence simulate_episode(const EpisodeMeta& meta, const FhnParams& params) {
    meta.validate();
    params.validate();
    const int n = meta.grid;
    const std::size_t cells = static_cast<std::size_t>(n) * n;
    GridState state(n);
    std::vector<double> stim(cells), scratch(cells);
    VoltageSequence out(meta.frames, n);
    long step = 0;
    for (int f = 0; f < meta.frames; ++f) {
        std::fill(stim.begin(), stim.end(), 0.0);
        stimulus_field(meta, f, stim);
        for (int s = 0; s < params.save_every; ++s, ++step) fhn_step_inplace(state, params, stim, scratch, step);
        std::copy(state.v.begin(), state.v.end(), out.frame(f).begin());
    }
    return out;
}

VoltageSequence binarize_sequence(const VoltageSequence& x) {
    if (x.values.empty()) throw PreconditionError("binarize_sequence: empty sequence");
    double lo = x.values.front();
    double hi = lo;
    for (double v : x.values) {
        if (!std::isfinite(v)) throw PreconditionError("binarize_sequence: non-finite value");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) throw PreconditionError("binarize_sequence: degenerate normalization (all values equal)");
    VoltageSequence out = x;
    const double span = hi - lo;
    for (double& v : out.values) v = (v - lo) / span >= 0.5 ? 1.0 : 0.0;
    return out;
}

} // namespace cessm::fhn
