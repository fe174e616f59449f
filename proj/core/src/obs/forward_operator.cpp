// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/obs/forward_operator.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cessm/io/container.hpp"

namespace cessm::obs {

DenseMatrix DenseMatrix::identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double inverse_square_kernel(double r_mm) {
    if (!(r_mm > 0.0)) throw PreconditionError("inverse_square_kernel: distance must be positive");
    return 1.0 / (4.0 * std::numbers::pi * r_mm * r_mm);
}

ForwardOperator build_forward_operator(int grid, const ElectrodeLayout& layout) {
    if (grid < 4) throw PreconditionError("build_forward_operator: grid must be >= 4");
    if (layout.rows < 2 || layout.cols < 2 || layout.count() < 4) {
        throw PreconditionError("build_forward_operator: at least 4 electrodes on a 2-D lattice required");
    }
    if (!(layout.height_mm > 0.0)) {
        throw PreconditionError("build_forward_operator: degenerate geometry (electrode height must be > 0)");
    }
    ForwardOperator op;
    op.grid = grid;
    op.layout = layout;
    const double dx = layout.domain_mm / grid;
    for (int r = 0; r < grid; ++r) {
        for (int c = 0; c < grid; ++c) op.grid_positions.push_back({(c + 0.5) * dx, (r + 0.5) * dx, 0.0});
    }
    for (int i = 0; i < layout.rows; ++i) {
        for (int j = 0; j < layout.cols; ++j) {
            op.electrode_positions.push_back({(j + 0.5) * layout.domain_mm / layout.cols,
                                              (i + 0.5) * layout.domain_mm / layout.rows, layout.height_mm});
        }
    }
    op.H = DenseMatrix(layout.count(), grid * grid);
    for (int m = 0; m < op.H.rows; ++m) {
        const auto& e = op.electrode_positions[m];
        double sum = 0.0;
        for (int n = 0; n < op.H.cols; ++n) {
            const auto& g = op.grid_positions[n];
            const double r = std::hypot(e[0] - g[0], e[1] - g[1], e[2] - g[2]);
            const double w = inverse_square_kernel(r);
            op.H(m, n) = w;
            sum += w;
        }
        for (int n = 0; n < op.H.cols; ++n) op.H(m, n) /= sum;
    }
    return op;
}

std::vector<double> observe_frame(const DenseMatrix& H, std::span<const double> x) {
    if (static_cast<int>(x.size()) != H.cols) {
        throw ShapeError("observe: frame has " + std::to_string(x.size()) + " nodes, operator expects " +
                         std::to_string(H.cols));
    }
    std::vector<double> y(static_cast<std::size_t>(H.rows), 0.0);
    for (int m = 0; m < H.rows; ++m) {
        const auto row = H.row(m);
        double acc = 0.0;
        for (int n = 0; n < H.cols; ++n) acc += row[n] * x[n];
        y[m] = acc;
    }
    return y;
}

ObservationSequence observe(const DenseMatrix& H, const VoltageSequence& x) {
    if (x.frame_size() != H.cols) throw ShapeError("observe: grid does not match forward operator");
    ObservationSequence Y(x.frames, H.rows);
    for (int t = 0; t < x.frames; ++t) {
        const auto y = observe_frame(H, x.frame(t));
        std::copy(y.begin(), y.end(), Y.frame(t).begin());
    }
    return Y;
}

ObservationSequence observe(const ForwardOperator& op, const VoltageSequence& x) { return observe(op.H, x); }

namespace {

io::NamedArray to_array(const std::string& name, const std::vector<Point3>& pts) {
    io::NamedArray a;
    a.name = name;
    a.shape = {static_cast<std::int64_t>(pts.size()), 3};
    for (const auto& p : pts) {
        for (double v : p) a.data.push_back(static_cast<float>(v));
    }
    return a;
}

std::vector<Point3> from_array(const io::NamedArray& a) {
    std::vector<Point3> pts;
    for (std::size_t i = 0; i + 2 < a.data.size(); i += 3) pts.push_back({a.data[i], a.data[i + 1], a.data[i + 2]});
    return pts;
}

} // namespace

void save_forward_operator(const std::filesystem::path& path, const ForwardOperator& op) {
    io::ArrayFile file;
    file.attributes["kind"] = "forward_operator";
    file.attributes["version"] = "1";
    file.attributes["grid"] = std::to_string(op.grid);
    file.attributes["electrode_rows"] = std::to_string(op.layout.rows);
    file.attributes["electrode_cols"] = std::to_string(op.layout.cols);
    file.attributes["height_mm"] = std::to_string(op.layout.height_mm);
    file.attributes["domain_mm"] = std::to_string(op.layout.domain_mm);
    file.attributes["kernel"] = "inverse_square_row_normalized";
    io::NamedArray H;
    H.name = "H";
    H.shape = {op.H.rows, op.H.cols};
    H.data.assign(op.H.data.begin(), op.H.data.end());
    file.arrays.push_back(std::move(H));
    file.arrays.push_back(to_array("electrode_positions", op.electrode_positions));
    file.arrays.push_back(to_array("grid_positions", op.grid_positions));
    io::write_new(path, file);
}

ForwardOperator load_forward_operator(const std::filesystem::path& path) {
    const auto file = io::read(path);
    ForwardOperator op;
    op.grid = std::stoi(file.attribute("grid"));
    op.layout.rows = std::stoi(file.attribute("electrode_rows"));
    op.layout.cols = std::stoi(file.attribute("electrode_cols"));
    op.layout.height_mm = std::stod(file.attribute("height_mm"));
    op.layout.domain_mm = std::stod(file.attribute("domain_mm"));
    const auto& H = file.array("H");
    if (H.shape.size() != 2 || H.shape[1] != static_cast<std::int64_t>(op.grid) * op.grid) {
        throw FormatError("forward operator: H shape does not match grid");
    }
    op.H = DenseMatrix(static_cast<int>(H.shape[0]), static_cast<int>(H.shape[1]));
    op.H.data.assign(H.data.begin(), H.data.end());
    op.electrode_positions = from_array(file.array("electrode_positions"));
    op.grid_positions = from_array(file.array("grid_positions"));
    return op;
}

} // namespace cessm::obs
