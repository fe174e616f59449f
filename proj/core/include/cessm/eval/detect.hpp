// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "cessm/sequence.hpp"

namespace cessm::eval {

/// Thresholds in pixels for a 32 x 32 grid; `for_grid` scales them linearly.
struct DetectorConfig {
    double min_size_px = 3.0;
    double min_distance_px = 3.0;
    int start_frame = 3; // earlier frames belong to the initial excitation(s)

    static DetectorConfig for_grid(int grid);
};

struct Detection {
    bool found = false;
    int onset_frame = -1;
    double row = 0.0; // centroid, pixels
    double col = 0.0;
    int component_size = 0;
};

struct Component {
    std::vector<int> pixels; // flat indices r * N + c
    double row = 0.0;
    double col = 0.0;

    int size() const { return static_cast<int>(pixels.size()); }
};

/// 4-connected components of the active (>= 0.5) pixels of an N x N frame, in
/// order of their first pixel in row-major scan.
std::vector<Component> components(std::span<const double> frame, int grid);

/// Earliest frame holding a new component of at least `min_size` pixels whose
/// every pixel lies at least `min_distance` from the previous frame's active
/// set; reports the largest such component of that frame.
Detection detect_foci(const VoltageSequence& binary, const DetectorConfig& config);

} // namespace cessm::eval
