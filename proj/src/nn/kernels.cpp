#include "cdagger/nn/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cdagger::nn::kernels {

namespace {

constexpr std::size_t kMr = 4;   // rows of C per register tile
constexpr std::size_t kNr = 32;  // columns of C per register tile

// Full 4 x 32 tile: C[0:4, 0:32] (+)= A[0:4, 0:K] * B[0:K, 0:32].
inline void tile_full(const double* A, std::size_t lda, const double* B, std::size_t ldb, double* C,
                      std::size_t ldc, std::size_t K, bool accumulate) {
    double c[kMr][kNr] = {};
    for (std::size_t k = 0; k < K; ++k) {
        const double* b = B + k * ldb;
        for (std::size_t r = 0; r < kMr; ++r) {
            const double a = A[r * lda + k];
#pragma omp simd
            for (std::size_t j = 0; j < kNr; ++j) c[r][j] += a * b[j];
        }
    }
    for (std::size_t r = 0; r < kMr; ++r) {
        double* out = C + r * ldc;
        if (accumulate) {
#pragma omp simd
            for (std::size_t j = 0; j < kNr; ++j) out[j] += c[r][j];
        } else {
#pragma omp simd
            for (std::size_t j = 0; j < kNr; ++j) out[j] = c[r][j];
        }
    }
}

// Ragged tile at the matrix edges, mr <= kMr and nr <= kNr.
inline void tile_edge(const double* A, std::size_t lda, const double* B, std::size_t ldb, double* C,
                      std::size_t ldc, std::size_t K, std::size_t mr, std::size_t nr, bool accumulate) {
    double c[kMr][kNr] = {};
    for (std::size_t k = 0; k < K; ++k) {
        const double* b = B + k * ldb;
        for (std::size_t r = 0; r < mr; ++r) {
            const double a = A[r * lda + k];
            for (std::size_t j = 0; j < nr; ++j) c[r][j] += a * b[j];
        }
    }
    for (std::size_t r = 0; r < mr; ++r) {
        double* out = C + r * ldc;
        for (std::size_t j = 0; j < nr; ++j) out[j] = accumulate ? out[j] + c[r][j] : c[r][j];
    }
}

void check_shapes(std::size_t a_rows, std::size_t a_cols, std::size_t b_rows, std::size_t b_cols, const char* what) {
    if (a_cols != b_rows) throw std::invalid_argument(std::string(what) + ": inner dimensions differ");
    (void)a_rows;
    (void)b_cols;
}

void prepare_output(Matrix& C, std::size_t M, std::size_t N, bool accumulate, const char* what) {
    if (accumulate) {
        if (C.rows() != M || C.cols() != N) throw std::invalid_argument(std::string(what) + ": accumulator shape mismatch");
    } else {
        C.resize(M, N);
    }
}

void gemm_nn_reference(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    const std::size_t M = A.rows(), K = A.cols(), N = B.cols();
    if (accumulate) {
        // Sum the product first, then add, in the same order as the tiles.
        Matrix tmp(M, N);
        gemm_nn_reference(A, B, tmp, false);
        for (std::size_t i = 0; i < C.size(); ++i) C.data()[i] += tmp.data()[i];
        return;
    }
    C.fill(0.0);
    for (std::size_t i = 0; i < M; ++i) {
        double* c = C.data() + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const double a = A(i, k);
            const double* b = B.data() + k * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
        }
    }
}

void gemm_nn_blocked(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    const std::size_t M = A.rows(), K = A.cols(), N = B.cols();
    const std::size_t row_tiles = (M + kMr - 1) / kMr;
    const std::size_t col_tiles = (N + kNr - 1) / kNr;
    const auto tiles = static_cast<std::ptrdiff_t>(row_tiles * col_tiles);
    const double* a = A.data();
    const double* b = B.data();
    double* c = C.data();

    // Column-tile-major order keeps one K x 32 panel of B hot across the row
    // tiles that consume it.
#pragma omp parallel for schedule(static) if (tiles > 8)
    for (std::ptrdiff_t t = 0; t < tiles; ++t) {
        const std::size_t jt = static_cast<std::size_t>(t) / row_tiles;
        const std::size_t it = static_cast<std::size_t>(t) % row_tiles;
        const std::size_t i0 = it * kMr, j0 = jt * kNr;
        const std::size_t mr = std::min(kMr, M - i0), nr = std::min(kNr, N - j0);
        if (mr == kMr && nr == kNr) {
            tile_full(a + i0 * K, K, b + j0, N, c + i0 * N + j0, N, K, accumulate);
        } else {
            tile_edge(a + i0 * K, K, b + j0, N, c + i0 * N + j0, N, K, mr, nr, accumulate);
        }
    }
}

}  // namespace

void transpose(const Matrix& in, Matrix& out) {
    out.resize(in.cols(), in.rows());
    constexpr std::size_t kBlock = 32;
    for (std::size_t r0 = 0; r0 < in.rows(); r0 += kBlock) {
        for (std::size_t c0 = 0; c0 < in.cols(); c0 += kBlock) {
            const std::size_t r1 = std::min(in.rows(), r0 + kBlock);
            const std::size_t c1 = std::min(in.cols(), c0 + kBlock);
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t c = c0; c < c1; ++c) out(c, r) = in(r, c);
            }
        }
    }
}

void gemm_nn(Execution exec, const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    check_shapes(A.rows(), A.cols(), B.rows(), B.cols(), "gemm_nn");
    prepare_output(C, A.rows(), B.cols(), accumulate, "gemm_nn");
    if (exec == Execution::Serial) {
        gemm_nn_reference(A, B, C, accumulate);
    } else {
        gemm_nn_blocked(A, B, C, accumulate);
    }
}

void gemm_nt(Execution exec, const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    if (A.cols() != B.cols()) throw std::invalid_argument("gemm_nt: inner dimensions differ");
    prepare_output(C, A.rows(), B.rows(), accumulate, "gemm_nt");
    if (exec == Execution::Serial) {
        // Dot-product form straight from the definition.
        const std::size_t M = A.rows(), N = B.rows(), K = A.cols();
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = 0; j < N; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < K; ++k) s += A(i, k) * B(j, k);
                C(i, j) = accumulate ? C(i, j) + s : s;
            }
        }
        return;
    }
    thread_local Matrix bt;
    transpose(B, bt);
    gemm_nn_blocked(A, bt, C, accumulate);
}

void gemm_tn(Execution exec, const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    if (A.rows() != B.rows()) throw std::invalid_argument("gemm_tn: inner dimensions differ");
    prepare_output(C, A.cols(), B.cols(), accumulate, "gemm_tn");
    if (exec == Execution::Serial) {
        const std::size_t M = A.cols(), N = B.cols(), K = A.rows();
        Matrix tmp(M, N);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t i = 0; i < M; ++i) {
                const double a = A(k, i);
                double* c = tmp.data() + i * N;
                const double* b = B.data() + k * N;
                for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
            }
        }
        for (std::size_t i = 0; i < C.size(); ++i) C.data()[i] = accumulate ? C.data()[i] + tmp.data()[i] : tmp.data()[i];
        return;
    }
    thread_local Matrix at;
    transpose(A, at);
    gemm_nn_blocked(at, B, C, accumulate);
}

void add_bias(Execution exec, Matrix& X, std::span<const double> b) {
    if (b.size() != X.cols()) throw std::invalid_argument("add_bias: size mismatch");
    const auto rows = static_cast<std::ptrdiff_t>(X.rows());
    const std::size_t cols = X.cols();
    double* x = X.data();
    if (exec == Execution::Serial) {
        for (std::ptrdiff_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) x[r * cols + c] += b[c];
        }
        return;
    }
#pragma omp parallel for schedule(static) if (rows * static_cast<std::ptrdiff_t>(cols) > 65536)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
#pragma omp simd
        for (std::size_t c = 0; c < cols; ++c) x[r * cols + c] += b[c];
    }
}

void column_sums(const Matrix& X, std::span<double> out, bool accumulate) {
    if (out.size() != X.cols()) throw std::invalid_argument("column_sums: size mismatch");
    if (!accumulate) std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r = 0; r < X.rows(); ++r) {
        const auto row = X.row(r);
        for (std::size_t c = 0; c < X.cols(); ++c) out[c] += row[c];
    }
}

}  // namespace cdagger::nn::kernels
