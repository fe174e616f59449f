// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "cessm/nn/tape.hpp"

namespace cessm::nn {

/// Autonomous vector field over a state split into blocks (e.g. {a, z}).
using VectorField = std::function<std::vector<Var>(const std::vector<Var>&)>;

/// Classic fixed-step RK4 from t0 to t1 in `n_steps` steps. Every stage is
/// recorded on the tape, so gradients are those of the discrete solution.
/// Throws DivergedError on a non-finite state.
std::vector<Var> rk4_integrate(const VectorField& f, std::vector<Var> s0, double t0, double t1, int n_steps);
Var rk4_integrate(const std::function<Var(Var)>& f, Var s0, double t0, double t1, int n_steps);

} // namespace cessm::nn
