#pragma once

// Data-parallel inner loops. Every kernel in `nids::kernels` is OpenMP
// parallel and writes each output element from exactly one thread, summing
// in a fixed order, so results are bit-identical for any thread count.
// `nids::kernels::reference` holds plain serial versions used by the tests
// and the benchmark as a correctness and speed baseline.

#include <cstddef>
#include <span>

namespace nids::kernels {

// C[m x n] (+)= A[m x k] * B[k x n]
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
          bool accumulate);
// C[m x n] (+)= A^T * B with A stored [k x m], B stored [k x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);
// C[m x n] (+)= A * B^T with A stored [m x k], B stored [n x k]
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);

// out[j] (+)= sum_i a[i*n + j]
void column_sums(std::size_t rows, std::size_t n, const double* a, double* out, bool accumulate);

// Unfolds a [batch, length, channels] signal into rows of [kernel * channels]
// for every output position. `pad_left` zero rows precede the signal.
struct Conv1dGeometry {
    std::size_t batch, length, channels, kernel, pad_left, out_length;
};
void im2col_1d(const Conv1dGeometry& g, const double* in, double* cols);
// Adjoint of im2col_1d: scatters column gradients back onto the signal.
void col2im_1d(const Conv1dGeometry& g, const double* cols, double* in_grad);

// k nearest candidates of every query row, by squared Euclidean distance.
// Ties break toward the lower row index. A query never matches itself.
// `out_idx` / `out_dist` are [queries.size() x k]. Requires k <= candidates
// (excluding the query itself).
void knn(const double* data, std::size_t cols, std::span<const std::size_t> queries,
         std::span<const std::size_t> candidates, std::size_t k, std::size_t* out_idx, double* out_dist);

// values[r, c] = std[c] > 0 ? (values[r, c] - mean[c]) / std[c] : 0
void standardize(std::size_t rows, std::size_t cols, double* values, const double* mean, const double* stddev);

double squared_distance(const double* a, const double* b, std::size_t n);

namespace reference {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
          bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);
void im2col_1d(const Conv1dGeometry& g, const double* in, double* cols);
void col2im_1d(const Conv1dGeometry& g, const double* cols, double* in_grad);
void knn(const double* data, std::size_t cols, std::span<const std::size_t> queries,
         std::span<const std::size_t> candidates, std::size_t k, std::size_t* out_idx, double* out_dist);
void standardize(std::size_t rows, std::size_t cols, double* values, const double* mean, const double* stddev);

}  // namespace reference

}  // namespace nids::kernels
