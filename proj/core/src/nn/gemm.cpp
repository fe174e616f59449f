// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/nn/gemm.hpp"

#include <vector>

namespace cessm::nn::gemm {

void nn(int m, int n, int k, const double* A, const double* B, double* C) {
    for (int i = 0; i < m; ++i) {
        double* __restrict c = C + static_cast<long>(i) * n;
        const double* a = A + static_cast<long>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double ap = a[p];
            const double* __restrict b = B + static_cast<long>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += ap * b[j];
        }
    }
}

void nt(int m, int n, int k, const double* A, const double* B, double* C) {
    std::vector<double> Bt(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j) {
        for (int p = 0; p < k; ++p) Bt[static_cast<std::size_t>(p) * n + j] = B[static_cast<long>(j) * k + p];
    }
    nn(m, n, k, A, Bt.data(), C);
}

void tn(int m, int n, int k, const double* A, const double* B, double* C) {
    for (int i = 0; i < m; ++i) {
        double* __restrict c = C + static_cast<long>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double ap = A[static_cast<long>(p) * m + i];
            const double* __restrict b = B + static_cast<long>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += ap * b[j];
        }
    }
}

} // namespace cessm::nn::gemm
