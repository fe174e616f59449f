// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Differentiable primitives. Every op records its result on the tape owning its
// inputs. Tensors are row-major; the leading dimension is the batch ("rows").

#include <span>

#include "cessm/nn/tape.hpp"

namespace cessm::nn {

inline constexpr double kBceClamp = 1e-7;

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// s * a + c, elementwise.
Var affine(Var a, double s, double c);
/// sum_i coeffs[i] * xs[i], accumulated left to right.
Var lincomb(std::span<const Var> xs, std::span<const double> coeffs);

Var tanh(Var a);
Var sigmoid(Var a);
Var elu(Var a);
Var absolute(Var a);

/// x [B, in], W [out, in], optional b [out] -> [B, out].
Var dense(Var x, Var W, Var b = {});

/// x [B, C, H, W], W [O, C, K, K], optional b [O] -> [B, O, Ho, Wo].
Var conv2d(Var x, Var W, Var b, int stride, int pad);
/// x [B, C, H, W], W [C, O, K, K], optional b [O] -> [B, O, (H-1)s-2p+K, (W-1)s-2p+K].
Var conv_transpose2d(Var x, Var W, Var b, int stride, int pad);

Var reshape(Var a, Shape shape);
/// Stacks along the leading dimension; trailing sizes must agree.
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, int begin, int count);
/// [B, d_i] pieces -> [B, sum d_i].
Var concat_cols(std::span<const Var> parts);

/// Per-row mean binary cross-entropy of probabilities `pred` [R, P] against
/// `target` (R*P values); predictions are clamped to [1e-7, 1 - 1e-7]. -> [R]
Var bce_rows(Var pred, std::span<const double> target);
/// sum_i w[i] * v[i] -> scalar.
Var weighted_sum(Var v, std::span<const double> w);
Var sum(Var a);
Var mean(Var a);

} // namespace cessm::nn
