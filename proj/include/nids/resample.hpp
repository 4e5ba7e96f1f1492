#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nids/preprocess.hpp"

namespace nids {

enum class ResampleMethod : std::uint8_t { None = 0, Smote = 1, Adasyn = 2, BorderlineSmote = 3 };

std::string_view to_string(ResampleMethod m);
std::optional<ResampleMethod> parse_resample_method(std::string_view s);

struct ResampleConfig {
    ResampleMethod method = ResampleMethod::Smote;
    std::size_t k_neighbors = 5;
    double target_ratio = 1.0;  // desired minority / majority after resampling
    std::uint64_t rng_seed = 0;
};

// Where a synthetic row came from: seed + lambda * (neighbor - seed).
struct SyntheticOrigin {
    std::size_t seed_row;
    std::size_t neighbor_row;
    double lambda;
};

struct ResampleResult {
    FeatureMatrix matrix;  // original rows first, synthetic rows appended
    std::vector<std::uint8_t> labels;
    std::size_t original_rows = 0;
    std::vector<SyntheticOrigin> origins;
    std::vector<std::string> warnings;

    std::size_t synthetic_rows() const { return matrix.rows - original_rows; }
};

// Number of synthetic minority rows needed to reach `target_ratio`.
std::size_t synthetic_count(std::size_t minority, std::size_t majority, double target_ratio);

// Spreads `total` over `n` slots as evenly as possible; the `total % n`
// extra units go to randomly chosen distinct slots.
std::vector<std::size_t> uniform_allocation(std::size_t n, std::size_t total, std::uint64_t seed);

// Rounds non-negative weights (normalized to sum 1) times `total` to
// integers summing exactly to `total` (largest remainder, ties to lower index).
std::vector<std::size_t> proportional_allocation(std::span<const double> weights, std::size_t total);

// Fraction of majority samples among each minority sample's k nearest
// neighbours over the whole set. Indexed like `minority_rows`.
std::vector<double> majority_fraction(const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                                      std::span<const std::size_t> minority_rows, std::size_t k);

enum class BorderlineClass : std::uint8_t { Safe, Danger, Noise };
BorderlineClass classify_borderline(std::size_t majority_neighbors, std::size_t k);

ResampleResult smote(const FeatureMatrix& m, std::span<const std::uint8_t> labels, const ResampleConfig& cfg);
ResampleResult adasyn(const FeatureMatrix& m, std::span<const std::uint8_t> labels, const ResampleConfig& cfg);
ResampleResult borderline_smote(const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                                const ResampleConfig& cfg);
// Dispatches on cfg.method; None returns the input unchanged.
ResampleResult resample(const FeatureMatrix& m, std::span<const std::uint8_t> labels, const ResampleConfig& cfg);

}  // namespace nids
