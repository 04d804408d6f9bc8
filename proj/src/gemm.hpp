// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cblas.h>

namespace xmodal::detail {

// Row-major C = alpha * op(A) * op(B) + beta * C. OpenBLAS is held to one
// thread: its threaded kernels change the summation order with the thread
// count, which would make results depend on the machine's core count.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                 int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  static const bool pinned = (openblas_set_num_threads(1), true);
  (void)pinned;
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// Double precision only backs the gradient oracles, so a plain loop is fast
// enough. It also sidesteps the Cooperlake dgemm kernel of OpenBLAS 0.3.20,
// which returns wrong products for transposed operands.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<long>(i) * ldc;
    for (int j = 0; j < n; ++j) ci[j] = beta == 0.0 ? 0.0 : beta * ci[j];
    for (int p = 0; p < k; ++p) {
      const double av = alpha * (trans_a ? a[static_cast<long>(p) * lda + i] : a[static_cast<long>(i) * lda + p]);
      if (av == 0.0) continue;
      if (trans_b) {
        for (int j = 0; j < n; ++j) ci[j] += av * b[static_cast<long>(j) * ldb + p];
      } else {
        const double* bp = b + static_cast<long>(p) * ldb;
        for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  }
}

}  // namespace xmodal::detail
