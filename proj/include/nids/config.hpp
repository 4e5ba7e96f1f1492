#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "nids/dataset.hpp"
#include "nids/detectors.hpp"

namespace nids {

struct ExperimentPaths {
    std::filesystem::path train, test_plus, test_21;
    std::filesystem::path mapping;  // empty: built-in taxonomy
    std::filesystem::path artifacts;
};

// Fast mode trains on a stratified subsample with capped epochs, width and
// ensemble sizes. Disabled when fraction is 0.
struct FastMode {
    double fraction = 0.0;
    std::size_t min_per_category = 20;
    std::size_t max_epochs = 3;
    double width_scale = 0.125;
    std::size_t max_trees = 20;

    bool enabled() const { return fraction > 0.0; }
};

struct MetaSettings {
    std::size_t folds = 5;
    ForestConfig forest;
};

// Flat `section.key = value` text. Every key has a default except `seed`.
// Relative paths resolve against the directory holding the config file.
struct ExperimentConfig {
    ExperimentPaths paths;
    std::optional<std::uint64_t> seed;
    bool skip_first_row = false;
    FastMode fast;
    MetaSettings meta;
    std::array<DetectorSpec, 4> detectors;  // canonical order

    ExperimentConfig();

    static ExperimentConfig parse(std::string_view text, const std::filesystem::path& base_dir,
                                  const std::string& origin = "<memory>");
    static ExperimentConfig load(const std::filesystem::path& path);

    // Sets one key; throws on an unknown key or a bad value.
    void set(std::string_view key, std::string_view value, const std::filesystem::path& base_dir = {});
    void validate() const;

    // Every non-path key with its value, sorted by key.
    std::string effective_text() const;
    // Digest of effective_text(). Paths are locations, not settings, so they are left out.
    std::uint64_t digest() const;

    std::uint64_t require_seed() const;
    // The spec that training actually uses: seed derived from the global
    // seed and fast-mode caps applied.
    DetectorSpec effective_detector(AttackCategory c) const;
    ForestConfig effective_meta_forest() const;
    AttackMap attack_map() const;
};

// Default config text with every key documented by its value.
std::string default_config_text();

}  // namespace nids
