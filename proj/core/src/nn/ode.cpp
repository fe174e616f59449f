// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/nn/ode.hpp"

#include <array>
#include <cmath>
#include <string>

#include "cessm/errors.hpp"
#include "cessm/nn/ops.hpp"

namespace cessm::nn {
namespace {

std::vector<Var> stage_state(const std::vector<Var>& s, const std::vector<Var>& k, double h) {
    std::vector<Var> out;
    out.reserve(s.size());
    const std::array<double, 2> c{1.0, h};
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::array<Var, 2> xs{s[i], k[i]};
        out.push_back(lincomb(xs, c));
    }
    return out;
}

void check_finite(const std::vector<Var>& s, int step) {
    for (const auto& v : s) {
        for (double x : v.value()) {
            if (!std::isfinite(x)) {
                throw DivergedError("rk4_integrate: non-finite state after step " + std::to_string(step));
            }
        }
    }
}

} // namespace

std::vector<Var> rk4_integrate(const VectorField& f, std::vector<Var> s, double t0, double t1, int n_steps) {
    if (n_steps < 1) throw PreconditionError("rk4_integrate: n_steps must be >= 1");
    if (s.empty()) throw PreconditionError("rk4_integrate: empty state");
    const double h = (t1 - t0) / n_steps;
    const std::array<double, 5> w{1.0, h / 6.0, h / 3.0, h / 3.0, h / 6.0};
    for (int step = 0; step < n_steps; ++step) {
        const auto k1 = f(s);
        const auto k2 = f(stage_state(s, k1, h / 2.0));
        const auto k3 = f(stage_state(s, k2, h / 2.0));
        const auto k4 = f(stage_state(s, k3, h));
        if (k1.size() != s.size() || k2.size() != s.size() || k3.size() != s.size() || k4.size() != s.size()) {
            throw ShapeError("rk4_integrate: vector field returned the wrong number of blocks");
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            const std::array<Var, 5> xs{s[i], k1[i], k2[i], k3[i], k4[i]};
            s[i] = lincomb(xs, w);
        }
        check_finite(s, step);
    }
    return s;
}

Var rk4_integrate(const std::function<Var(Var)>& f, Var s0, double t0, double t1, int n_steps) {
    const VectorField field = [&](const std::vector<Var>& s) { return std::vector<Var>{f(s[0])}; };
    return rk4_integrate(field, std::vector<Var>{s0}, t0, t1, n_steps).front();
}

} // namespace cessm::nn
