// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/eval/detect.hpp"

#include <cmath>
#include <limits>

#include "cessm/errors.hpp"

namespace cessm::eval {

DetectorConfig DetectorConfig::for_grid(int grid) {
    DetectorConfig c;
    const double s = grid / 32.0;
    c.min_size_px *= s;
    c.min_distance_px *= s;
    return c;
}

std::vector<Component> components(std::span<const double> frame, int grid) {
    const int P = grid * grid;
    if (static_cast<int>(frame.size()) != P) throw ShapeError("components: frame size does not match the grid");
    std::vector<int> label(static_cast<std::size_t>(P), -1);
    std::vector<Component> out;
    std::vector<int> stack;
    for (int start = 0; start < P; ++start) {
        if (frame[static_cast<std::size_t>(start)] < 0.5 || label[static_cast<std::size_t>(start)] >= 0) continue;
        Component comp;
        const int id = static_cast<int>(out.size());
        stack.assign(1, start);
        label[static_cast<std::size_t>(start)] = id;
        while (!stack.empty()) {
            const int idx = stack.back();
            stack.pop_back();
            comp.pixels.push_back(idx);
            const int r = idx / grid, c = idx % grid;
            const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& n : nbr) {
                if (n[0] < 0 || n[0] >= grid || n[1] < 0 || n[1] >= grid) continue;
                const int j = n[0] * grid + n[1];
                if (frame[static_cast<std::size_t>(j)] >= 0.5 && label[static_cast<std::size_t>(j)] < 0) {
                    label[static_cast<std::size_t>(j)] = id;
                    stack.push_back(j);
                }
            }
        }
        double sr = 0.0, sc = 0.0;
        for (int idx : comp.pixels) {
            sr += idx / grid;
            sc += idx % grid;
        }
        comp.row = sr / comp.size();
        comp.col = sc / comp.size();
        out.push_back(std::move(comp));
    }
    return out;
}

namespace {

double distance_to_set(const Component& comp, const std::vector<int>& active, int grid) {
    double best = std::numeric_limits<double>::infinity();
    for (int p : comp.pixels) {
        const int pr = p / grid, pc = p % grid;
        for (int q : active) {
            const double dr = pr - q / grid, dc = pc - q % grid;
            best = std::min(best, dr * dr + dc * dc);
        }
    }
    return std::sqrt(best);
}

} // namespace

Detection detect_foci(const VoltageSequence& binary, const DetectorConfig& config) {
    const int N = binary.grid;
    Detection det;
    for (int f = std::max(config.start_frame, 1); f < binary.frames; ++f) {
        std::vector<int> prev;
        const auto pf = binary.frame(f - 1);
        for (int i = 0; i < N * N; ++i) {
            if (pf[static_cast<std::size_t>(i)] >= 0.5) prev.push_back(i);
        }
        const Component* chosen = nullptr;
        const auto comps = components(binary.frame(f), N);
        for (const auto& c : comps) {
            if (c.size() < config.min_size_px) continue;
            if (distance_to_set(c, prev, N) < config.min_distance_px) continue;
            if (!chosen || c.size() > chosen->size()) chosen = &c;
        }
        if (chosen) {
            det.found = true;
            det.onset_frame = f;
            det.row = chosen->row;
            det.col = chosen->col;
            det.component_size = chosen->size();
            return det;
        }
    }
    return det;
}

} // namespace cessm::eval
