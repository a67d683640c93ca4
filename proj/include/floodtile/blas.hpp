#pragma once

namespace floodtile::blas {

// Row-major C = alpha * op(A) * op(B) + beta * C.
// Backed by OpenBLAS when available, otherwise a portable loop kernel.
void gemm_f32(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
              int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm_f64(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
              int lda, const double* b, int ldb, double beta, double* c, int ldc);

bool using_external_blas();

}  // namespace floodtile::blas
