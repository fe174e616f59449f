// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Two-variable FitzHugh-Nagumo excitable medium on an N x N grid:
//
//   dv/dt = D lap(v) + v (v - a_exc)(1 - v) - w + I_stim
//   dw/dt = eps (v - gamma w)
//
// integrated with explicit Euler and zero-flux (Neumann) boundaries.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cessm/sequence.hpp"

namespace cessm::fhn {

struct FhnParams {
    double a_exc = 0.1;
    double eps = 0.01;
    double gamma = 3.0;
    double diffusion = 10.0; // mm^2 per time unit
    double dt = 0.1;         // time units
    double dx = 100.0 / 32;  // mm
    int save_every = 20;     // integration steps per saved frame

    /// Throws PreconditionError unless dt, dx > 0, save_every >= 1 and dt <= dx^2 / (4 D).
    void validate() const;
    double frame_duration() const { return dt * save_every; }
};

/// Default constants for an N x N discretisation of the 100 mm domain. The
/// saved-frame duration stays at 2 time units; dt shrinks if the explicit
/// stability bound requires it.
FhnParams default_params(int grid);

struct GridState {
    int grid = 0;
    std::vector<double> v;
    std::vector<double> w;

    GridState() = default;
    explicit GridState(int n) : grid(n), v(static_cast<std::size_t>(n) * n, 0.0), w(v.size(), 0.0) {}
};

struct StimulusEvent {
    int row = 0;
    int col = 0;
    double radius = 3.0; // pixels
    double amplitude = 2.0;
    int onset_frame = 0;
    int duration_frames = 1;

    bool active_in_frame(int frame) const { return frame >= onset_frame && frame < onset_frame + duration_frames; }
    bool covers(int r, int c) const {
        const double dr = r - row;
        const double dc = c - col;
        return dr * dr + dc * dc <= radius * radius;
    }
    friend bool operator==(const StimulusEvent&, const StimulusEvent&) = default;
};

enum class EpisodeKind { native, intervention };

struct EpisodeMeta {
    int index = 0;
    std::uint64_t seed = 0;
    int grid = 32;
    int frames = 60;
    StimulusEvent initial_stim;
    std::optional<StimulusEvent> second_stim; // native double excitation
    std::optional<StimulusEvent> foci_stim;   // intervention episodes only

    EpisodeKind kind() const { return foci_stim ? EpisodeKind::intervention : EpisodeKind::native; }
    /// Throws PreconditionError when a stimulus centre lies outside the grid or an onset is negative.
    void validate() const;
    friend bool operator==(const EpisodeMeta&, const EpisodeMeta&) = default;
};

/// Adds every stimulus active in `frame` into `field` (N*N, row-major).
void stimulus_field(const EpisodeMeta& meta, int frame, std::span<double> field);

/// One explicit Euler step. Throws DivergedError if the new state is not finite;
/// `step_index` is only used in that message.
GridState fhn_step(const GridState& state, const FhnParams& params, std::span<const double> stim_field,
                   long step_index = -1);

/// In-place variant used by the episode loop; `scratch` must hold N*N doubles.
void fhn_step_inplace(GridState& state, const FhnParams& params, std::span<const double> stim_field,
                      std::span<double> scratch, long step_index = -1);

/// Runs `meta.frames` saved frames; the saved frame f is the state after the
/// integration steps of frame f, so a stimulus with onset f is visible in frame f.
VoltageSequence simulate_episode(const EpisodeMeta& meta, const FhnParams& params);

/// Per-episode min-max normalisation followed by thresholding at 0.5.
/// Throws PreconditionError when the sequence is constant or non-finite.
VoltageSequence binarize_sequence(const VoltageSequence& x);

} // namespace cessm::fhn
