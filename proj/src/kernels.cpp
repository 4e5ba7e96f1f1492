#include "nids/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <queue>
#include <utility>
#include <vector>

#include "nids/common.hpp"

namespace nids::kernels {

namespace {

using Index = std::ptrdiff_t;

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

}  // namespace

double squared_distance(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const double d0 = a[i] - b[i], d1 = a[i + 1] - b[i + 1];
        const double d2 = a[i + 2] - b[i + 2], d3 = a[i + 3] - b[i + 3];
        s0 += d0 * d0;
        s1 += d1 * d1;
        s2 += d2 * d2;
        s3 += d3 * d3;
    }
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s0 += d * d;
    }
    return (s0 + s1) + (s2 + s3);
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
          bool accumulate) {
    const bool par = m * n * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        double* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, 0.0);
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
    const bool par = m * n * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        double* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
    const bool par = m * n * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot(arow, b + j * k, k);
            crow[j] = accumulate ? crow[j] + v : v;
        }
    }
}

void column_sums(std::size_t rows, std::size_t n, const double* a, double* out, bool accumulate) {
    const bool par = rows * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index j = 0; j < static_cast<Index>(n); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += a[i * n + j];
        out[j] = accumulate ? out[j] + s : s;
    }
}

void im2col_1d(const Conv1dGeometry& g, const double* in, double* cols) {
    const std::size_t width = g.kernel * g.channels;
    const bool par = g.batch * g.out_length * width >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index b = 0; b < static_cast<Index>(g.batch); ++b) {
        const double* src = in + b * g.length * g.channels;
        for (std::size_t t = 0; t < g.out_length; ++t) {
            double* row = cols + (b * g.out_length + t) * width;
            for (std::size_t kk = 0; kk < g.kernel; ++kk) {
                const Index pos = static_cast<Index>(t + kk) - static_cast<Index>(g.pad_left);
                double* dst = row + kk * g.channels;
                if (pos < 0 || pos >= static_cast<Index>(g.length)) {
                    std::fill(dst, dst + g.channels, 0.0);
                } else {
                    std::copy_n(src + pos * g.channels, g.channels, dst);
                }
            }
        }
    }
}

void col2im_1d(const Conv1dGeometry& g, const double* cols, double* in_grad) {
    const std::size_t width = g.kernel * g.channels;
    const bool par = g.batch * g.out_length * width >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index b = 0; b < static_cast<Index>(g.batch); ++b) {
        double* dst = in_grad + b * g.length * g.channels;
        std::fill(dst, dst + g.length * g.channels, 0.0);
        for (std::size_t t = 0; t < g.out_length; ++t) {
            const double* row = cols + (b * g.out_length + t) * width;
            for (std::size_t kk = 0; kk < g.kernel; ++kk) {
                const Index pos = static_cast<Index>(t + kk) - static_cast<Index>(g.pad_left);
                if (pos < 0 || pos >= static_cast<Index>(g.length)) continue;
                double* d = dst + pos * g.channels;
                const double* s = row + kk * g.channels;
                for (std::size_t c = 0; c < g.channels; ++c) d[c] += s[c];
            }
        }
    }
}

void knn(const double* data, std::size_t cols, std::span<const std::size_t> queries,
         std::span<const std::size_t> candidates, std::size_t k, std::size_t* out_idx, double* out_dist) {
    if (k == 0) return;
    const bool par = queries.size() * candidates.size() * cols >= kParallelWork;
    using Entry = std::pair<double, std::size_t>;
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (Index qi = 0; qi < static_cast<Index>(queries.size()); ++qi) {
        const std::size_t q = queries[qi];
        const double* qrow = data + q * cols;
        std::priority_queue<Entry> heap;  // max-heap on (distance, index)
        for (std::size_t c : candidates) {
            if (c == q) continue;
            const Entry e{squared_distance(qrow, data + c * cols, cols), c};
            if (heap.size() < k) {
                heap.push(e);
            } else if (e < heap.top()) {
                heap.pop();
                heap.push(e);
            }
        }
        for (std::size_t j = heap.size(); j-- > 0;) {
            out_idx[qi * k + j] = heap.top().second;
            out_dist[qi * k + j] = heap.top().first;
            heap.pop();
        }
    }
}

void standardize(std::size_t rows, std::size_t cols, double* values, const double* mean, const double* stddev) {
    const bool par = rows * cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index r = 0; r < static_cast<Index>(rows); ++r) {
        double* row = values + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] = stddev[c] > 0.0 ? (row[c] - mean[c]) / stddev[c] : 0.0;
    }
}

// ---------------------------------------------------------------------------

namespace reference {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
          bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
}

void im2col_1d(const Conv1dGeometry& g, const double* in, double* cols) {
    const std::size_t width = g.kernel * g.channels;
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t t = 0; t < g.out_length; ++t)
            for (std::size_t kk = 0; kk < g.kernel; ++kk)
                for (std::size_t c = 0; c < g.channels; ++c) {
                    const long pos = static_cast<long>(t + kk) - static_cast<long>(g.pad_left);
                    const bool inside = pos >= 0 && pos < static_cast<long>(g.length);
                    cols[(b * g.out_length + t) * width + kk * g.channels + c] =
                        inside ? in[(b * g.length + static_cast<std::size_t>(pos)) * g.channels + c] : 0.0;
                }
}

void col2im_1d(const Conv1dGeometry& g, const double* cols, double* in_grad) {
    const std::size_t width = g.kernel * g.channels;
    std::fill(in_grad, in_grad + g.batch * g.length * g.channels, 0.0);
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t t = 0; t < g.out_length; ++t)
            for (std::size_t kk = 0; kk < g.kernel; ++kk)
                for (std::size_t c = 0; c < g.channels; ++c) {
                    const long pos = static_cast<long>(t + kk) - static_cast<long>(g.pad_left);
                    if (pos < 0 || pos >= static_cast<long>(g.length)) continue;
                    in_grad[(b * g.length + static_cast<std::size_t>(pos)) * g.channels + c] +=
                        cols[(b * g.out_length + t) * width + kk * g.channels + c];
                }
}

void knn(const double* data, std::size_t cols, std::span<const std::size_t> queries,
         std::span<const std::size_t> candidates, std::size_t k, std::size_t* out_idx, double* out_dist) {
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const std::size_t q = queries[qi];
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t c : candidates) {
            if (c == q) continue;
            all.emplace_back(squared_distance(data + q * cols, data + c * cols, cols), c);
        }
        std::sort(all.begin(), all.end());
        if (all.size() < k) throw Error("knn: fewer candidates than k");
        for (std::size_t j = 0; j < k; ++j) {
            out_idx[qi * k + j] = all[j].second;
            out_dist[qi * k + j] = all[j].first;
        }
    }
}

void standardize(std::size_t rows, std::size_t cols, double* values, const double* mean, const double* stddev) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double& v = values[r * cols + c];
            v = stddev[c] > 0.0 ? (v - mean[c]) / stddev[c] : 0.0;
        }
}

}  // namespace reference

}  // namespace nids::kernels
