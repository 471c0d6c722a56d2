#pragma once

#include "cdagger/nn/matrix.hpp"
#include "cdagger/util/parallel.hpp"

namespace cdagger::nn::kernels {

// Dense kernels used by the MLP. Each has a straightforward serial reference
// and a cache-blocked OpenMP version. Both sum every output element over k in
// ascending order, and the build disables multiply-add contraction, so the two
// are bit-identical, and so is the parallel version across thread counts.

/// C (+)= A * B with A: M x K, B: K x N.
void gemm_nn(Execution exec, const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false);

/// C (+)= A * B^T with A: M x K, B: N x K.
void gemm_nt(Execution exec, const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false);

/// C (+)= A^T * B with A: K x M, B: K x N.
void gemm_tn(Execution exec, const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false);

/// out = transpose(in)
void transpose(const Matrix& in, Matrix& out);

/// Row-wise bias add: X[r, c] += b[c].
void add_bias(Execution exec, Matrix& X, std::span<const double> b);

/// Column sums: out[c] (+)= sum_r X[r, c].
void column_sums(const Matrix& X, std::span<double> out, bool accumulate = false);

}  // namespace cdagger::nn::kernels
