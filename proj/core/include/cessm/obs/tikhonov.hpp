// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "cessm/obs/forward_operator.hpp"

namespace cessm::obs {

/// First-order difference operator over the 4-neighbour grid graph: one row
/// per edge (i, j) with entries +1 at i and -1 at j.
struct RegularizerSpec {
    int grid = 0;
    double lambda = 0.0;
    std::vector<std::pair<int, int>> edges;

    int nodes() const { return grid * grid; }
    /// (L x)_e = x_i - x_j.
    std::vector<double> apply(std::span<const double> x) const;
};

RegularizerSpec first_order_regularizer(int grid, double lambda);

/// Factorises (H^T H + lambda L^T L) once and solves for many right-hand sides.
class TikhonovSolver {
public:
    /// Throws SolverError if the system is not numerically positive definite.
    TikhonovSolver(const DenseMatrix& H, const RegularizerSpec& reg);
    ~TikhonovSolver();
    TikhonovSolver(TikhonovSolver&&) noexcept;
    TikhonovSolver& operator=(TikhonovSolver&&) noexcept;

    std::vector<double> solve(std::span<const double> y) const;
    double reciprocal_condition() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// argmin ||H x - y||^2 + lambda ||L x||^2 via the normal equations.
std::vector<double> tikhonov_solve(const DenseMatrix& H, std::span<const double> y, const RegularizerSpec& reg);

/// Per-frame Tikhonov estimate of the source field (no post-processing).
VoltageSequence ecgi_reconstruct_raw(const ObservationSequence& Y, const DenseMatrix& H, const RegularizerSpec& reg);
/// Per-frame Tikhonov estimate followed by per-episode min-max binarisation.
VoltageSequence ecgi_reconstruct(const ObservationSequence& Y, const DenseMatrix& H, const RegularizerSpec& reg);
/// Same with a prebuilt factorisation, for reconstructing many episodes at one lambda.
VoltageSequence ecgi_reconstruct(const ObservationSequence& Y, const TikhonovSolver& solver, int grid);

} // namespace cessm::obs
