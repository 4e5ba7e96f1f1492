// OpenMP kernels against their serial reference versions.
//
//   bench_kernels --benchmark_filter=gemm
//   OMP_NUM_THREADS=4 bench_kernels

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "nids/kernels.hpp"
#include "nids/rng.hpp"

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    nids::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        if constexpr (Parallel)
            nids::kernels::gemm(n, n, n, a.data(), b.data(), c.data(), false);
        else
            nids::kernels::reference::gemm(n, n, n, a.data(), b.data(), c.data(), false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_gemm_nt(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        if constexpr (Parallel)
            nids::kernels::gemm_nt(n, n, n, a.data(), b.data(), c.data(), false);
        else
            nids::kernels::reference::gemm_nt(n, n, n, a.data(), b.data(), c.data(), false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_knn(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    constexpr std::size_t cols = 122, k = 5;
    const auto data = random_vec(rows * cols, 3);
    std::vector<std::size_t> all(rows);
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> idx(rows * k);
    std::vector<double> dist(rows * k);
    for (auto _ : state) {
        if constexpr (Parallel)
            nids::kernels::knn(data.data(), cols, all, all, k, idx.data(), dist.data());
        else
            nids::kernels::reference::knn(data.data(), cols, all, all, k, idx.data(), dist.data());
        benchmark::DoNotOptimize(idx.data());
    }
}

template <bool Parallel>
void BM_im2col(benchmark::State& state) {
    nids::kernels::Conv1dGeometry g{static_cast<std::size_t>(state.range(0)), 122, 8, 3, 1, 122};
    const auto in = random_vec(g.batch * g.length * g.channels, 4);
    std::vector<double> cols(g.batch * g.out_length * g.kernel * g.channels);
    for (auto _ : state) {
        if constexpr (Parallel)
            nids::kernels::im2col_1d(g, in.data(), cols.data());
        else
            nids::kernels::reference::im2col_1d(g, in.data(), cols.data());
        benchmark::DoNotOptimize(cols.data());
    }
}

template <bool Parallel>
void BM_standardize(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    constexpr std::size_t cols = 122;
    const auto v0 = random_vec(rows * cols, 5);
    std::vector<double> mean(cols, 0.5), sd(cols, 2.0);
    auto v = v0;
    for (auto _ : state) {
        if constexpr (Parallel)
            nids::kernels::standardize(rows, cols, v.data(), mean.data(), sd.data());
        else
            nids::kernels::reference::standardize(rows, cols, v.data(), mean.data(), sd.data());
        benchmark::DoNotOptimize(v.data());
    }
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Name("gemm/reference")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<true>)->Name("gemm/openmp")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nt<false>)->Name("gemm_nt/reference")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nt<true>)->Name("gemm_nt/openmp")->Arg(64)->Arg(256);
BENCHMARK(BM_knn<false>)->Name("knn/reference")->Arg(500)->Arg(2000);
BENCHMARK(BM_knn<true>)->Name("knn/openmp")->Arg(500)->Arg(2000);
BENCHMARK(BM_im2col<false>)->Name("im2col/reference")->Arg(64)->Arg(512);
BENCHMARK(BM_im2col<true>)->Name("im2col/openmp")->Arg(64)->Arg(512);
BENCHMARK(BM_standardize<false>)->Name("standardize/reference")->Arg(10000)->Arg(100000);
BENCHMARK(BM_standardize<true>)->Name("standardize/openmp")->Arg(10000)->Arg(100000);

BENCHMARK_MAIN();
