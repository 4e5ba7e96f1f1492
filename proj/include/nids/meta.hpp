#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nids/classical.hpp"
#include "nids/detectors.hpp"

namespace nids {

// Column names of the meta feature matrix, canonical detector order.
inline constexpr std::array<std::string_view, 4> kMetaColumns{"p_dos", "p_probe", "p_r2l", "p_u2r"};

// Exactly one detector per attack category, in any order.
using DetectorSet = std::span<const DetectorArtifact* const>;

// Sorts `detectors` into canonical order; throws on a missing or repeated category.
std::array<const DetectorArtifact*, 4> canonical_detectors(DetectorSet detectors);

// One row per matrix row: the four detector probabilities (DoS, Probe, R2L, U2R).
// Throws if a detector was trained on a different preprocessing schema.
FeatureMatrix build_meta_features(DetectorSet detectors, const FeatureMatrix& m);

// Out-of-fold detector probabilities. Fold detectors are trained from the
// given specs on all rows outside their fold.
struct OutOfFold {
    FeatureMatrix features;
    std::vector<std::uint32_t> fold_of_row;
    std::vector<std::vector<std::size_t>> training_rows;  // per fold, ascending
};

OutOfFold out_of_fold_features(std::span<const DetectorSpec> specs, const FeatureMatrix& x,
                               std::span<const AttackCategory> categories, std::size_t k, std::uint64_t seed,
                               std::uint64_t schema_digest, std::uint64_t config_digest);

// Empty when every row's fold detector excluded that row; otherwise one
// message per violation.
std::vector<std::string> audit_out_of_fold(const OutOfFold& oof);

struct MetaArtifact {
    RandomForest forest;
    ForestConfig forest_config;
    std::array<std::uint64_t, 4> detector_digests{};  // canonical order
    std::uint64_t schema_digest = 0;
    std::uint64_t config_digest = 0;
    std::size_t folds = 0;
    std::size_t training_rows = 0;
    double training_accuracy = 0.0;
};

// `features` are out-of-fold meta features; labels are 1 for any attack.
MetaArtifact train_meta(DetectorSet detectors, const FeatureMatrix& features, std::span<const std::uint8_t> anomaly,
                        const ForestConfig& cfg, std::size_t folds, std::uint64_t config_digest);

struct MetaPrediction {
    FeatureMatrix features;
    std::vector<double> probability;
    std::vector<std::uint8_t> decisions;  // probability >= 0.5
};

MetaPrediction predict_anomaly(const MetaArtifact& meta, DetectorSet detectors, const FeatureMatrix& m);
MetaPrediction predict_anomaly_from_features(const MetaArtifact& meta, FeatureMatrix features);

std::string serialize_meta(const MetaArtifact& a);
MetaArtifact deserialize_meta(std::string_view payload);

}  // namespace nids
