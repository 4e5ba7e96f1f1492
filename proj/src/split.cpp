#include "nids/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "nids/common.hpp"
#include "nids/rng.hpp"

namespace nids {

namespace {

// Rows of each stratum, in stratum order, each group shuffled.
std::map<std::uint32_t, std::vector<std::size_t>> shuffled_groups(std::span<const std::uint32_t> strata,
                                                                   std::uint64_t seed) {
    std::map<std::uint32_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);
    for (auto& [s, rows] : groups) {
        Rng rng(mix_seed(seed, s));
        rng.shuffle(rows);
    }
    return groups;
}

}  // namespace

RowSplit stratified_split(std::span<const std::uint32_t> strata, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw Error("stratified_split: fraction must be in [0,1)");
    RowSplit out;
    for (auto& [s, rows] : shuffled_groups(strata, seed)) {
        const std::size_t n = rows.size();
        auto hold = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
        if (fraction > 0.0 && n >= 2) hold = std::clamp<std::size_t>(hold, 1, n - 1);
        out.holdout.insert(out.holdout.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(hold));
        out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(hold), rows.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.holdout.begin(), out.holdout.end());
    return out;
}

std::vector<std::uint32_t> make_stratified_folds(std::span<const std::uint32_t> strata, std::size_t k,
                                                 std::uint64_t seed) {
    if (k < 2) throw Error("make_stratified_folds: need at least two folds");
    std::vector<std::uint32_t> fold(strata.size(), 0);
    std::size_t offset = 0;
    for (auto& [s, rows] : shuffled_groups(strata, seed)) {
        // Continue the deal where the previous stratum stopped so fold sizes stay balanced.
        for (std::size_t i = 0; i < rows.size(); ++i) fold[rows[i]] = static_cast<std::uint32_t>((offset + i) % k);
        offset = (offset + rows.size()) % k;
    }
    return fold;
}

std::vector<std::size_t> stratified_subsample(std::span<const std::uint32_t> strata, double fraction,
                                              std::size_t min_per_stratum, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("stratified_subsample: fraction must be in (0,1]");
    std::vector<std::size_t> out;
    for (auto& [s, rows] : shuffled_groups(strata, seed)) {
        const std::size_t n = rows.size();
        const auto want = std::max(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)),
                                   std::min(n, min_per_stratum));
        out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(want, n)));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace nids
