// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/nn/tape.hpp"

#include <cmath>
#include <numeric>

#include "cessm/errors.hpp"

namespace cessm::nn {

int shape_size(const Shape& shape) { return std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<>()); }

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

const Shape& Var::shape() const { return tape_->shape(id_); }
int Var::size() const { return static_cast<int>(tape_->value(id_).size()); }
std::span<const double> Var::value() const { return tape_->value(id_); }
std::span<const double> Var::grad() const { return tape_->grad_view(id_); }
bool Var::needs_grad() const { return tape_->needs_grad(id_); }

double Var::item() const {
    const auto v = value();
    if (v.size() != 1) throw ShapeError("Var::item on non-scalar of shape " + shape_string(shape()));
    return v[0];
}

Var Tape::push(Shape shape, std::vector<double> value, bool needs_grad, Backward backward, std::string_view label) {
    if (shape_size(shape) != static_cast<int>(value.size())) {
        throw ShapeError("tape: value size " + std::to_string(value.size()) + " does not match shape " +
                         shape_string(shape) + " (" + std::string(label) + ")");
    }
    Node node;
    node.shape = std::move(shape);
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    if (needs_grad) node.backward = std::move(backward);
    node.label = label;
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Shape shape, std::vector<double> value, std::string_view label) {
    return push(std::move(shape), std::move(value), false, {}, label);
}

Var Tape::variable(Shape shape, std::vector<double> value, std::string_view label) {
    return push(std::move(shape), std::move(value), true, {}, label);
}

Var Tape::emit(Shape shape, std::vector<double> value, std::span<const Var> inputs, Backward backward,
               std::string_view label) {
    bool needs = false;
    for (const auto& in : inputs) {
        if (!in.valid()) continue;
        if (&in.tape() != this) throw Error("tape: op '" + std::string(label) + "' mixes vars from different tapes");
        needs = needs || needs_grad(in.id());
    }
    return push(std::move(shape), std::move(value), needs, std::move(backward), label);
}

Var Tape::emit(Shape shape, std::vector<double> value, std::initializer_list<Var> inputs, Backward backward,
               std::string_view label) {
    return emit(std::move(shape), std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward), label);
}

void Tape::set_label(Var v, std::string_view label) { nodes_[static_cast<std::size_t>(v.id())].label = label; }

std::vector<double>& Tape::grad(int id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
    return node.grad;
}

int Tape::first_non_finite() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        for (double v : nodes_[i].value) {
            if (!std::isfinite(v)) return static_cast<int>(i);
        }
    }
    return -1;
}

void Tape::backward(Var root) {
    if (&root.tape() != this) throw Error("tape: backward root belongs to another tape");
    if (root.size() != 1) throw ShapeError("tape: backward root must be scalar, got " + shape_string(root.shape()));
    if (!std::isfinite(root.item())) {
        const int bad = first_non_finite();
        throw DivergedError("non-finite loss; first non-finite value produced by '" + (bad >= 0 ? label(bad) : "?") +
                    "' (node " + std::to_string(bad) + ")");
    }
    if (!root.needs_grad()) return;
    grad(root.id())[0] += 1.0;
    for (int id = root.id(); id >= 0; --id) {
        auto& node = nodes_[static_cast<std::size_t>(id)];
        if (!node.needs_grad || node.grad.empty() || !node.backward) continue;
        node.backward(*this, id);
    }
}

} // namespace cessm::nn
