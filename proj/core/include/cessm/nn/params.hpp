// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cessm/nn/tape.hpp"

namespace cessm::nn {

struct ParamArray {
    std::string name;
    Shape shape;
    std::vector<double> values;
    bool trainable = true;
};

/// Named collection of parameter arrays in declaration order.
class ParamSet {
public:
    /// Adds a zero-filled array; throws if the name already exists.
    ParamArray& add(const std::string& name, Shape shape, bool trainable = true);
    ParamArray& at(std::string_view name);
    const ParamArray& at(std::string_view name) const;
    bool contains(std::string_view name) const { return index_.contains(std::string(name)); }
    std::size_t index_of(std::string_view name) const;

    std::vector<ParamArray>& arrays() { return arrays_; }
    const std::vector<ParamArray>& arrays() const { return arrays_; }
    std::size_t size() const { return arrays_.size(); }
    std::size_t parameter_count() const;

    /// Sets the trainable flag of every array whose name starts with `prefix`.
    void set_trainable(std::string_view prefix, bool trainable);

    /// SHA-256 over the values of arrays selected by `select`, in declaration order.
    std::string hash(const std::function<bool(const ParamArray&)>& select) const;
    std::string frozen_hash() const;

    bool all_finite() const;

private:
    std::vector<ParamArray> arrays_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// One gradient buffer per ParamSet array (same order and sizes).
using Gradients = std::vector<std::vector<double>>;

Gradients zero_gradients(const ParamSet& params);
void add_into(Gradients& acc, const Gradients& g, double scale = 1.0);

enum class GradMode {
    all,            // every array is a differentiable leaf
    trainable_only, // frozen arrays enter as constants
    none,           // inference: no gradients anywhere
};

/// Puts a ParamSet's arrays on a tape on first use.
class Binding {
public:
    Binding(Tape& tape, const ParamSet& params, GradMode mode);

    Var operator[](std::string_view name) const;
    Tape& tape() const { return *tape_; }
    const ParamSet& params() const { return *params_; }

    /// Gradients after Tape::backward; arrays never used or without gradient are zero.
    Gradients gradients() const;

private:
    Tape* tape_;
    const ParamSet* params_;
    GradMode mode_;
    mutable std::vector<int> ids_;
};

} // namespace cessm::nn
