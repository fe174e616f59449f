// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "cessm/sequence.hpp"

namespace cessm::obs {

/// Dense row-major matrix.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }

    static DenseMatrix identity(int n);
};

struct ElectrodeLayout {
    int rows = 8;
    int cols = 8;
    double height_mm = 20.0;
    double domain_mm = 100.0;

    int count() const { return rows * cols; }
};

using Point3 = std::array<double, 3>;

/// Lead field mapping an N x N source field to M remote electrodes.
struct ForwardOperator {
    int grid = 0;
    ElectrodeLayout layout;
    DenseMatrix H; // M x N*N
    std::vector<Point3> electrode_positions;
    std::vector<Point3> grid_positions;

    int electrodes() const { return H.rows; }
    int sources() const { return H.cols; }
};

/// Point-source attenuation 1 / (4 pi r^2).
double inverse_square_kernel(double r_mm);

/// Electrodes on a uniform lattice over the domain at `layout.height_mm`; rows
/// of H normalised to unit sum.
ForwardOperator build_forward_operator(int grid, const ElectrodeLayout& layout);

/// y = H x for a single frame.
std::vector<double> observe_frame(const DenseMatrix& H, std::span<const double> x);
/// Y_t = H vec(x_t) for every frame.
ObservationSequence observe(const ForwardOperator& op, const VoltageSequence& x);
ObservationSequence observe(const DenseMatrix& H, const VoltageSequence& x);

void save_forward_operator(const std::filesystem::path& path, const ForwardOperator& op);
ForwardOperator load_forward_operator(const std::filesystem::path& path);

} // namespace cessm::obs
