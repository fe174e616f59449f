// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cessm::nn {

using Shape = std::vector<int>;

int shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    bool valid() const { return tape_ != nullptr; }
    int id() const { return id_; }
    Tape& tape() const { return *tape_; }

    const Shape& shape() const;
    int size() const;
    int rows() const { return shape().front(); }
    int cols() const { return size() / rows(); }
    std::span<const double> value() const;
    /// Empty until backward() reached this node.
    std::span<const double> grad() const;
    double item() const;
    bool needs_grad() const;

private:
    friend class Tape;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Append-only record of a computation for reverse-mode differentiation.
class Tape {
public:
    /// Propagates node `self`'s gradient into its inputs.
    using Backward = std::function<void(Tape&, int self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Shape shape, std::vector<double> value, std::string_view label = {});
    Var variable(Shape shape, std::vector<double> value, std::string_view label = {});

    /// Records an op result. The backward closure is kept only when some input needs a gradient.
    Var emit(Shape shape, std::vector<double> value, std::initializer_list<Var> inputs, Backward backward,
             std::string_view label);
    Var emit(Shape shape, std::vector<double> value, std::span<const Var> inputs, Backward backward,
             std::string_view label);

    /// Seeds d(root)/d(root) = 1 and runs every recorded backward closure in reverse order.
    /// Throws Error if the root value is not finite, naming the first non-finite node.
    void backward(Var root);

    Var var(int id) { return Var(this, id); }
    const Shape& shape(int id) const { return nodes_[static_cast<std::size_t>(id)].shape; }
    std::span<const double> value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    const std::string& label(int id) const { return nodes_[static_cast<std::size_t>(id)].label; }
    void set_label(Var v, std::string_view label);

    /// Gradient buffer of a node, zero-initialised on first access.
    std::vector<double>& grad(int id);
    std::span<const double> grad_view(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    std::size_t size() const { return nodes_.size(); }

    /// Label and id of the first node holding a non-finite value, or -1.
    int first_non_finite() const;

private:
    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool needs_grad = false;
        Backward backward;
        std::string label;
    };

    Var push(Shape shape, std::vector<double> value, bool needs_grad, Backward backward, std::string_view label);

    std::deque<Node> nodes_;
};

} // namespace cessm::nn
