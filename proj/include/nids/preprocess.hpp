#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nids/dataset.hpp"

namespace nids {

// Dense row-major matrix with named columns.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::string> column_names;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c, std::vector<std::string> names = {});

    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }

    bool all_finite() const;
    FeatureMatrix select_rows(std::span<const std::size_t> idx) const;
};

// Digest of the ordered column names; artifacts use it to refuse a matrix
// produced by a different preprocessing schema.
std::uint64_t schema_digest(std::span<const std::string> column_names);

struct CategoryVocabulary {
    // Sorted, duplicate-free values of protocol_type, service, flag.
    std::array<std::vector<std::string>, 3> values;

    std::size_t width() const { return values[0].size() + values[1].size() + values[2].size(); }
    // Position of `value` within feature `f`'s list, or npos.
    std::size_t find(std::size_t f, std::string_view value) const;
};

CategoryVocabulary build_vocabulary(const LabeledDataset& train, const LabeledDataset& test);
CategoryVocabulary build_vocabulary(std::span<const LabeledDataset* const> datasets);

// 38 numeric columns in schema order followed by one indicator column per
// vocabulary entry (`protocol_type=tcp`, ...). The attack label and the
// difficulty column are not features.
FeatureMatrix one_hot_encode(std::span<const RawRecord> records, const CategoryVocabulary& vocab);
FeatureMatrix one_hot_encode(const LabeledDataset& d, const CategoryVocabulary& vocab);

struct ScalerParams {
    std::vector<double> mean;
    std::vector<double> stddev;  // population (divide-by-N)
    std::string fitted_on = "train";
};

ScalerParams fit_scaler(const FeatureMatrix& train, std::string fitted_on = "train");
FeatureMatrix apply_scaler(const FeatureMatrix& m, const ScalerParams& p);
// Undoes apply_scaler on columns with std > 0; zero-variance columns come back as their mean.
FeatureMatrix invert_scaler(const FeatureMatrix& m, const ScalerParams& p);

// Vocabulary + scaler, persisted as a versioned key = value text sidecar.
struct PreprocessState {
    CategoryVocabulary vocab;
    ScalerParams scaler;
    std::vector<std::string> column_names;

    FeatureMatrix transform(std::span<const RawRecord> records) const;
    FeatureMatrix transform(const LabeledDataset& d) const { return transform(d.records); }
    std::uint64_t schema() const { return schema_digest(column_names); }
};

PreprocessState fit_preprocess(const LabeledDataset& train, std::span<const LabeledDataset* const> vocab_sources);

inline constexpr int kSidecarVersion = 1;
std::string format_sidecar(const PreprocessState& s);
PreprocessState parse_sidecar(std::string_view text, const std::string& origin = "<memory>");
void save_sidecar(const std::filesystem::path& path, const PreprocessState& s);
PreprocessState load_sidecar(const std::filesystem::path& path);

}  // namespace nids
