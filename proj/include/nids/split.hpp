#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nids {

// Row partitions that keep each stratum's proportion. All index lists are
// returned in ascending order.
struct RowSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> holdout;
};

// round(fraction * n) rows of every stratum go to the holdout, but a stratum
// with at least two rows always contributes one row to each side.
RowSplit stratified_split(std::span<const std::uint32_t> strata, double fraction, std::uint64_t seed);

// Fold id in [0, k) per row; every stratum is dealt round-robin over the
// folds after a seeded shuffle.
std::vector<std::uint32_t> make_stratified_folds(std::span<const std::uint32_t> strata, std::size_t k,
                                                 std::uint64_t seed);

// Keeps max(ceil(fraction * n), min(n, min_per_stratum)) rows of each stratum.
std::vector<std::size_t> stratified_subsample(std::span<const std::uint32_t> strata, double fraction,
                                              std::size_t min_per_stratum, std::uint64_t seed);

template <typename T>
std::vector<std::uint32_t> as_strata(std::span<const T> v) {
    return std::vector<std::uint32_t>(v.begin(), v.end());
}

}  // namespace nids
