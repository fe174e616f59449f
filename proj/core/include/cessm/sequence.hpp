// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cessm/errors.hpp"

namespace cessm {

/// T frames of an N x N field stored row-major as [frame][row][col].
struct VoltageSequence {
    int frames = 0;
    int grid = 0;
    std::vector<double> values;

    VoltageSequence() = default;
    VoltageSequence(int frames_, int grid_)
        : frames(frames_), grid(grid_), values(static_cast<std::size_t>(frames_) * grid_ * grid_, 0.0) {}

    int frame_size() const { return grid * grid; }
    std::span<double> frame(int i) {
        return {values.data() + static_cast<std::size_t>(i) * frame_size(), static_cast<std::size_t>(frame_size())};
    }
    std::span<const double> frame(int i) const {
        return {values.data() + static_cast<std::size_t>(i) * frame_size(), static_cast<std::size_t>(frame_size())};
    }
    double at(int f, int r, int c) const { return values[(static_cast<std::size_t>(f) * grid + r) * grid + c]; }
    double& at(int f, int r, int c) { return values[(static_cast<std::size_t>(f) * grid + r) * grid + c]; }

    friend bool operator==(const VoltageSequence&, const VoltageSequence&) = default;
};

/// T frames of M electrode readings stored as [frame][electrode].
struct ObservationSequence {
    int frames = 0;
    int electrodes = 0;
    std::vector<double> values;

    ObservationSequence() = default;
    ObservationSequence(int frames_, int electrodes_)
        : frames(frames_), electrodes(electrodes_), values(static_cast<std::size_t>(frames_) * electrodes_, 0.0) {}

    std::span<double> frame(int i) {
        return {values.data() + static_cast<std::size_t>(i) * electrodes, static_cast<std::size_t>(electrodes)};
    }
    std::span<const double> frame(int i) const {
        return {values.data() + static_cast<std::size_t>(i) * electrodes, static_cast<std::size_t>(electrodes)};
    }

    friend bool operator==(const ObservationSequence&, const ObservationSequence&) = default;
};

} // namespace cessm
