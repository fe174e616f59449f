// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/nn/params.hpp"

#include <cmath>

#include "cessm/errors.hpp"
#include "cessm/io/sha256.hpp"

namespace cessm::nn {

ParamArray& ParamSet::add(const std::string& name, Shape shape, bool trainable) {
    if (contains(name)) throw Error("param set: duplicate array '" + name + "'");
    ParamArray a;
    a.name = name;
    a.values.assign(static_cast<std::size_t>(shape_size(shape)), 0.0);
    a.shape = std::move(shape);
    a.trainable = trainable;
    index_.emplace(name, arrays_.size());
    arrays_.push_back(std::move(a));
    return arrays_.back();
}

std::size_t ParamSet::index_of(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("param set: no array named '" + std::string(name) + "'");
    return it->second;
}

ParamArray& ParamSet::at(std::string_view name) { return arrays_[index_of(name)]; }
const ParamArray& ParamSet::at(std::string_view name) const { return arrays_[index_of(name)]; }

std::size_t ParamSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& a : arrays_) n += a.values.size();
    return n;
}

void ParamSet::set_trainable(std::string_view prefix, bool trainable) {
    for (auto& a : arrays_) {
        if (a.name.starts_with(prefix)) a.trainable = trainable;
    }
}

std::string ParamSet::hash(const std::function<bool(const ParamArray&)>& select) const {
    std::string bytes;
    for (const auto& a : arrays_) {
        if (!select(a)) continue;
        bytes += a.name;
        bytes += '\0';
        bytes.append(reinterpret_cast<const char*>(a.values.data()), a.values.size() * sizeof(double));
    }
    return io::sha256_hex(bytes);
}

std::string ParamSet::frozen_hash() const {
    return hash([](const ParamArray& a) { return !a.trainable; });
}

bool ParamSet::all_finite() const {
    for (const auto& a : arrays_) {
        for (double v : a.values) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

Gradients zero_gradients(const ParamSet& params) {
    Gradients g;
    g.reserve(params.size());
    for (const auto& a : params.arrays()) g.emplace_back(a.values.size(), 0.0);
    return g;
}

void add_into(Gradients& acc, const Gradients& g, double scale) {
    if (acc.size() != g.size()) throw ShapeError("gradients: array count mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (g[i].size() != acc[i].size()) throw ShapeError("gradients: size mismatch");
        for (std::size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += scale * g[i][j];
    }
}

Binding::Binding(Tape& tape, const ParamSet& params, GradMode mode)
    : tape_(&tape), params_(&params), mode_(mode), ids_(params.size(), -1) {}

Var Binding::operator[](std::string_view name) const {
    const std::size_t i = params_->index_of(name);
    if (ids_[i] < 0) {
        const auto& a = params_->arrays()[i];
        const bool differentiable =
            mode_ == GradMode::all || (mode_ == GradMode::trainable_only && a.trainable);
        Var v = differentiable ? tape_->variable(a.shape, a.values, a.name) : tape_->constant(a.shape, a.values, a.name);
        ids_[i] = v.id();
        return v;
    }
    return tape_->var(ids_[i]);
}

Gradients Binding::gradients() const {
    Gradients g = zero_gradients(*params_);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (ids_[i] < 0) continue;
        const auto gv = tape_->grad_view(ids_[i]);
        if (!gv.empty()) std::copy(gv.begin(), gv.end(), g[i].begin());
    }
    return g;
}

} // namespace cessm::nn
