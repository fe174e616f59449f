// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Central-difference gradient checks against the tape's reverse mode.

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cessm/nn/params.hpp"
#include "cessm/nn/tape.hpp"

namespace cessm::testing {

struct GradcheckResult {
    double max_rel_error = 0.0;
    std::string worst;
    int checked = 0;
};

inline std::string fmt_sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct Input {
    nn::Shape shape;
    std::vector<double> value;
};

using ScalarFn = std::function<nn::Var(nn::Tape&, std::span<const nn::Var>)>;

/// Checks every entry of every input.
inline GradcheckResult gradcheck(const ScalarFn& f, std::vector<Input> inputs, double h = 1e-5) {
    std::vector<std::vector<double>> analytic;
    {
        nn::Tape tape;
        std::vector<nn::Var> vars;
        for (const auto& in : inputs) vars.push_back(tape.variable(in.shape, in.value));
        auto out = f(tape, vars);
        tape.backward(out);
        for (auto& v : vars) {
            auto g = v.grad();
            analytic.emplace_back(g.begin(), g.end());
            analytic.back().resize(static_cast<std::size_t>(v.size()), 0.0);
        }
    }
    auto evaluate = [&]() {
        nn::Tape tape;
        std::vector<nn::Var> vars;
        for (const auto& in : inputs) vars.push_back(tape.constant(in.shape, in.value));
        return f(tape, vars).item();
    };
    GradcheckResult res;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t j = 0; j < inputs[i].value.size(); ++j) {
            const double x = inputs[i].value[j];
            inputs[i].value[j] = x + h;
            const double fp = evaluate();
            inputs[i].value[j] = x - h;
            const double fm = evaluate();
            inputs[i].value[j] = x;
            const double e = rel_error(analytic[i][j], (fp - fm) / (2 * h));
            ++res.checked;
            if (e > res.max_rel_error) {
                res.max_rel_error = e;
                res.worst = "input " + std::to_string(i) + "[" + std::to_string(j) + "]";
            }
        }
    }
    return res;
}

using ParamLossFn = std::function<nn::Var(const nn::Binding&)>;

/// Checks up to `per_array` randomly chosen entries of every trainable array.
inline GradcheckResult gradcheck_params(nn::ParamSet params, const ParamLossFn& f, int per_array = 6,
                                        double h = 1e-5, std::uint64_t seed = 7) {
    nn::Gradients analytic;
    {
        nn::Tape tape;
        nn::Binding p(tape, params, nn::GradMode::trainable_only);
        tape.backward(f(p));
        analytic = p.gradients();
    }
    auto evaluate = [&]() {
        nn::Tape tape;
        nn::Binding p(tape, params, nn::GradMode::none);
        return f(p).item();
    };
    std::mt19937_64 rng(seed);
    GradcheckResult res;
    for (std::size_t a = 0; a < params.size(); ++a) {
        auto& arr = params.arrays()[a];
        if (!arr.trainable) continue;
        const std::size_t n = arr.values.size();
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min<std::size_t>(n, static_cast<std::size_t>(per_array)));
        for (std::size_t j : idx) {
            const double x = arr.values[j];
            arr.values[j] = x + h;
            const double fp = evaluate();
            arr.values[j] = x - h;
            const double fm = evaluate();
            arr.values[j] = x;
            const double e = rel_error(analytic[a][j], (fp - fm) / (2 * h));
            ++res.checked;
            if (e > res.max_rel_error) {
                res.max_rel_error = e;
                res.worst = arr.name + "[" + std::to_string(j) + "] analytic " + fmt_sci(analytic[a][j]) +
                            " numeric " + fmt_sci((fp - fm) / (2 * h));
            }
        }
    }
    return res;
}

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

} // namespace cessm::testing
