// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Row-major matrix products with a fixed per-element accumulation order: each
// output element sums over the inner dimension in increasing index order, so a
// row's result never depends on which other rows share the call.

namespace cessm::nn::gemm {

/// C[m,n] += A[m,k] * B[k,n]
void nn(int m, int n, int k, const double* A, const double* B, double* C);
/// C[m,n] += A[m,k] * B[n,k]^T
void nt(int m, int n, int k, const double* A, const double* B, double* C);
/// C[m,n] += A[k,m]^T * B[k,n]
void tn(int m, int n, int k, const double* A, const double* B, double* C);

} // namespace cessm::nn::gemm
