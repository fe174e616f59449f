// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cessm/errors.hpp"
#include "cessm/model/sequences.hpp"
#include "cessm/obs/forward_operator.hpp"
#include "cessm/obs/tikhonov.hpp"
#include "../support/fixtures.hpp"
#include "../support/gradcheck.hpp"

using namespace cessm;
using namespace cessm::obs;
using cessm::testing::random_values;

namespace {

// Gaussian elimination with partial pivoting on a dense copy.
std::vector<double> gauss_solve(std::vector<double> A, std::vector<double> b, int n) {
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(A[i * n + k]) > std::abs(A[piv * n + k])) piv = i;
        for (int j = 0; j < n; ++j) std::swap(A[k * n + j], A[piv * n + j]);
        std::swap(b[k], b[piv]);
        for (int i = k + 1; i < n; ++i) {
            const double f = A[i * n + k] / A[k * n + k];
            for (int j = k; j < n; ++j) A[i * n + j] -= f * A[k * n + j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= A[i * n + j] * x[j];
        x[i] = s / A[i * n + i];
    }
    return x;
}

// Normal-equation oracle with L^T L assembled from the grid's 4-neighbour edges.
std::vector<double> brute_force_tikhonov(const DenseMatrix& H, const std::vector<double>& y, int grid, double lambda) {
    const int n = H.cols;
    std::vector<double> A(n * n, 0.0), b(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < H.rows; ++m) A[i * n + j] += H(m, i) * H(m, j);
    for (int r = 0; r < grid; ++r)
        for (int c = 0; c < grid; ++c) {
            const int i = r * grid + c;
            for (int j : {c + 1 < grid ? i + 1 : -1, r + 1 < grid ? i + grid : -1}) {
                if (j < 0) continue;
                A[i * n + i] += lambda;
                A[j * n + j] += lambda;
                A[i * n + j] -= lambda;
                A[j * n + i] -= lambda;
            }
        }
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < H.rows; ++m) b[i] += H(m, i) * y[m];
    return gauss_solve(A, b, n);
}

} // namespace

TEST_SUITE("obs") {

TEST_CASE("lead-field rows are normalised inverse-square weights") {
    ElectrodeLayout layout;
    layout.rows = 2;
    layout.cols = 3;
    const auto op = build_forward_operator(4, layout);
    REQUIRE(op.H.rows == 6);
    REQUIRE(op.H.cols == 16);
    for (int m = 0; m < 6; ++m) {
        const auto row = op.H.row(m);
        CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        double total = 0.0;
        std::vector<double> raw(16);
        for (int n = 0; n < 16; ++n) {
            const auto& e = op.electrode_positions[m];
            const auto& g = op.grid_positions[n];
            const double r = std::hypot(e[0] - g[0], e[1] - g[1], e[2] - g[2]);
            raw[n] = 1.0 / (4 * M_PI * r * r);
            total += raw[n];
        }
        for (int n = 0; n < 16; ++n) CHECK(row[n] == doctest::Approx(raw[n] / total).epsilon(1e-12));
        CHECK(op.electrode_positions[m][2] == 20.0);
    }
    CHECK(inverse_square_kernel(1.0) == doctest::Approx(1.0 / (4 * M_PI)));
    CHECK_THROWS_AS(inverse_square_kernel(0.0), PreconditionError);
    layout.height_mm = 0.0;
    CHECK_THROWS_AS(build_forward_operator(4, layout), PreconditionError);
}

TEST_CASE("observation is linear in the field") {
    const auto op = build_forward_operator(8, {});
    const auto a = random_values(64, 1), b = random_values(64, 2);
    std::vector<double> ab(64);
    for (int i = 0; i < 64; ++i) ab[i] = 2.0 * a[i] - 0.5 * b[i];
    const auto ya = observe_frame(op.H, a), yb = observe_frame(op.H, b), yab = observe_frame(op.H, ab);
    for (int m = 0; m < op.electrodes(); ++m) CHECK(yab[m] == doctest::Approx(2.0 * ya[m] - 0.5 * yb[m]));
    VoltageSequence x(2, 8);
    std::copy(a.begin(), a.end(), x.frame(1).begin());
    const auto Y = observe(op, x);
    CHECK(Y.frames == 2);
    for (int m = 0; m < op.electrodes(); ++m) {
        CHECK(Y.frame(0)[m] == 0.0);
        CHECK(Y.frame(1)[m] == ya[m]);
    }
}

TEST_CASE("a centred square lattice shares the symmetries of the grid") {
    const auto op = build_forward_operator(8, {});
    const auto xs = cessm::testing::disc_sequences(1, 2, 8, 4);
    const auto Y = observe(op, xs[0]);
    for (int t = 0; t < 8; ++t) {
        // Observing the transformed field equals permuting the electrodes of the original observation.
        const auto Yt = observe(op, model::dihedral(xs[0], t));
        VoltageSequence as_field(Y.frames, 8);
        as_field.values = Y.values;
        const auto permuted = model::dihedral(as_field, t);
        for (std::size_t i = 0; i < Yt.values.size(); ++i)
            CHECK(Yt.values[i] == doctest::Approx(permuted.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("forward operators round-trip through files") {
    cessm::testing::TempDir dir("obs");
    const auto op = build_forward_operator(8, {});
    save_forward_operator(dir.path() / "forward.bin", op);
    const auto back = load_forward_operator(dir.path() / "forward.bin");
    CHECK(back.grid == 8);
    CHECK(back.layout.rows == 8);
    CHECK(back.layout.height_mm == 20.0);
    for (std::size_t i = 0; i < op.H.data.size(); ++i)
        CHECK(back.H.data[i] == static_cast<double>(static_cast<float>(op.H.data[i])));
}

TEST_CASE("the difference operator has one row per grid edge") {
    const auto reg = first_order_regularizer(4, 0.5);
    CHECK(reg.edges.size() == 2u * 4 * 3);
    std::vector<double> ones(16, 1.0);
    for (double v : reg.apply(ones)) CHECK(v == 0.0);
    std::vector<double> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[i] = i % 4;
    const auto d = reg.apply(ramp);
    double s = 0;
    for (double v : d) s += v * v;
    CHECK(s == 12.0); // 12 horizontal edges with a unit step, vertical edges flat
}

TEST_CASE("Tikhonov matches the brute-force normal equations on random 6x9 systems") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        DenseMatrix H(6, 9);
        H.data = random_values(54, 100 + seed);
        const auto y = random_values(6, 200 + seed);
        const double lambda = std::pow(10.0, -3.0 + static_cast<double>(seed % 5));
        const auto x = tikhonov_solve(H, y, first_order_regularizer(3, lambda));
        const auto oracle = brute_force_tikhonov(H, y, 3, lambda);
        double num = 0, den = 0;
        for (int i = 0; i < 9; ++i) {
            num += (x[i] - oracle[i]) * (x[i] - oracle[i]);
            den += oracle[i] * oracle[i];
        }
        CAPTURE(seed);
        CHECK(std::sqrt(num / den) < 1e-8);
    }
}

TEST_CASE("the factorised solver agrees with the one-shot solve") {
    DenseMatrix H(6, 9);
    H.data = random_values(54, 9);
    const auto reg = first_order_regularizer(3, 0.1);
    const TikhonovSolver solver(H, reg);
    const auto y = random_values(6, 10);
    const auto a = solver.solve(y), b = tikhonov_solve(H, y, reg);
    for (int i = 0; i < 9; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    CHECK(solver.reciprocal_condition() > 0.0);
}

TEST_CASE("an unregularised underdetermined system is rejected") {
    DenseMatrix H(2, 9);
    H.data = random_values(18, 11);
    CHECK_THROWS_AS(TikhonovSolver(H, first_order_regularizer(3, 0.0)), SolverError);
}

TEST_CASE("ECGI binarises per episode and returns zeros for a flat estimate") {
    const auto op = build_forward_operator(8, {});
    const auto xs = cessm::testing::disc_sequences(1, 4, 8, 12);
    const auto Y = observe(op, xs[0]);
    const auto est = ecgi_reconstruct(Y, op.H, first_order_regularizer(8, 1e-3));
    CHECK(est.frames == 4);
    for (double v : est.values) CHECK((v == 0.0 || v == 1.0));
    ObservationSequence zero(3, op.electrodes());
    const auto flat = ecgi_reconstruct(zero, op.H, first_order_regularizer(8, 1e-3));
    for (double v : flat.values) CHECK(v == 0.0);
    ObservationSequence wrong(1, 3);
    CHECK_THROWS_AS(ecgi_reconstruct(wrong, op.H, first_order_regularizer(8, 1e-3)), ShapeError);
}

} // TEST_SUITE
