// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/obs/tikhonov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "cessm/fhn/simulator.hpp"

namespace cessm::obs {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<double> RegularizerSpec::apply(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != nodes()) throw ShapeError("regularizer: field size does not match grid");
    std::vector<double> out;
    out.reserve(edges.size());
    for (const auto& [i, j] : edges) out.push_back(x[i] - x[j]);
    return out;
}

RegularizerSpec first_order_regularizer(int grid, double lambda) {
    if (grid < 1) throw PreconditionError("regularizer: grid must be >= 1");
    if (!(lambda >= 0.0)) throw PreconditionError("regularizer: lambda must be >= 0");
    RegularizerSpec reg;
    reg.grid = grid;
    reg.lambda = lambda;
    for (int r = 0; r < grid; ++r) {
        for (int c = 0; c < grid; ++c) {
            const int i = r * grid + c;
            if (c + 1 < grid) reg.edges.emplace_back(i, i + 1);
            if (r + 1 < grid) reg.edges.emplace_back(i, i + grid);
        }
    }
    return reg;
}

struct TikhonovSolver::Impl {
    RowMajor Ht;  // N x M
    Eigen::LLT<Eigen::MatrixXd> llt;
    double rcond = 0.0;
};

TikhonovSolver::TikhonovSolver(const DenseMatrix& H, const RegularizerSpec& reg) : impl_(std::make_unique<Impl>()) {
    if (H.cols != reg.nodes()) throw ShapeError("tikhonov: operator columns do not match regularizer grid");
    if (!(reg.lambda >= 0.0)) throw PreconditionError("tikhonov: lambda must be >= 0");
    Eigen::Map<const RowMajor> Hm(H.data.data(), H.rows, H.cols);
    Eigen::MatrixXd A = Hm.transpose() * Hm;
    if (reg.lambda > 0.0) {
        for (const auto& [i, j] : reg.edges) {
            A(i, i) += reg.lambda;
            A(j, j) += reg.lambda;
            A(i, j) -= reg.lambda;
            A(j, i) -= reg.lambda;
        }
    }
    impl_->llt.compute(A);
    impl_->rcond = impl_->llt.info() == Eigen::Success ? impl_->llt.rcond() : 0.0;
    if (impl_->llt.info() != Eigen::Success || !(impl_->rcond > 1e-14)) {
        std::ostringstream msg;
        msg << "tikhonov: singular normal equations for lambda=" << reg.lambda
            << " (reciprocal condition estimate " << impl_->rcond << ")";
        throw SolverError(msg.str());
    }
    impl_->Ht = Hm.transpose();
}

TikhonovSolver::~TikhonovSolver() = default;
TikhonovSolver::TikhonovSolver(TikhonovSolver&&) noexcept = default;
TikhonovSolver& TikhonovSolver::operator=(TikhonovSolver&&) noexcept = default;

std::vector<double> TikhonovSolver::solve(std::span<const double> y) const {
    if (static_cast<Eigen::Index>(y.size()) != impl_->Ht.cols()) throw ShapeError("tikhonov: data size mismatch");
    Eigen::Map<const Eigen::VectorXd> ym(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::VectorXd x = impl_->llt.solve(impl_->Ht * ym);
    return {x.data(), x.data() + x.size()};
}

double TikhonovSolver::reciprocal_condition() const { return impl_->rcond; }

std::vector<double> tikhonov_solve(const DenseMatrix& H, std::span<const double> y, const RegularizerSpec& reg) {
    return TikhonovSolver(H, reg).solve(y);
}

namespace {

VoltageSequence solve_frames(const ObservationSequence& Y, const TikhonovSolver& solver, int grid) {
    VoltageSequence x(Y.frames, grid);
    for (int t = 0; t < Y.frames; ++t) {
        const auto xt = solver.solve(Y.frame(t));
        if (static_cast<int>(xt.size()) != x.frame_size()) throw ShapeError("ecgi: solver size does not match the grid");
        std::copy(xt.begin(), xt.end(), x.frame(t).begin());
    }
    return x;
}

VoltageSequence binarize_or_zero(VoltageSequence raw) {
    const auto [lo, hi] = std::minmax_element(raw.values.begin(), raw.values.end());
    if (raw.values.empty() || !(*hi > *lo)) {
        std::fill(raw.values.begin(), raw.values.end(), 0.0);
        return raw;
    }
    return fhn::binarize_sequence(raw);
}

} // namespace

VoltageSequence ecgi_reconstruct_raw(const ObservationSequence& Y, const DenseMatrix& H, const RegularizerSpec& reg) {
    if (Y.electrodes != H.rows) throw ShapeError("ecgi: observation width does not match operator rows");
    return solve_frames(Y, TikhonovSolver(H, reg), reg.grid);
}

VoltageSequence ecgi_reconstruct(const ObservationSequence& Y, const DenseMatrix& H, const RegularizerSpec& reg) {
    return binarize_or_zero(ecgi_reconstruct_raw(Y, H, reg));
}

VoltageSequence ecgi_reconstruct(const ObservationSequence& Y, const TikhonovSolver& solver, int grid) {
    return binarize_or_zero(solve_frames(Y, solver, grid));
}

} // namespace cessm::obs
