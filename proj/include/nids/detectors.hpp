#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nids/classical.hpp"
#include "nids/dataset.hpp"
#include "nids/evaluation.hpp"
#include "nids/network.hpp"
#include "nids/resample.hpp"
#include "nids/trainer.hpp"

namespace nids {

enum class ArchitectureId : std::uint8_t { DosCnnLstm, ProbeCnnBiLstmAttn, R2lCnnLstm, U2rLightweight };

std::string_view to_string(ArchitectureId a);
std::optional<ArchitectureId> parse_architecture(std::string_view s);

// The layer stack for `id` over an input of `input_width` features. Filter
// and unit counts are multiplied by `width_scale` (rounded, at least 1);
// the sigmoid head is never scaled.
NetworkSpec architecture(ArchitectureId id, std::size_t input_width, double width_scale = 1.0);

enum class ThresholdKind : std::uint8_t { Fixed, OptimizeF1 };

struct ThresholdPolicy {
    ThresholdKind kind = ThresholdKind::Fixed;
    double fixed = 0.5;
};

// Weighted sum of member probabilities: neural, forest, boosting, logistic.
struct EnsembleSpec {
    bool enabled = false;
    std::array<double, 4> weights{0.4, 0.3, 0.2, 0.1};
    ForestConfig forest;
    BoostConfig boosting;
    LogisticConfig logistic;
    bool members_on_resampled = true;  // false: members see the un-resampled training fold
};

// Which rows serve as negatives when training a detector.
enum class NegativePolicy : std::uint8_t { AllOthers, NormalOnly };

struct DetectorSpec {
    AttackCategory category = AttackCategory::DoS;
    ArchitectureId architecture = ArchitectureId::DosCnnLstm;
    double width_scale = 1.0;
    ResampleConfig resample;
    FocalLossParams loss;
    TrainConfig train;
    bool cost_sensitive = false;  // inverse-frequency class weights on the resampled fold
    EnsembleSpec ensemble;
    ThresholdPolicy threshold;
    NegativePolicy negatives = NegativePolicy::AllOthers;
    std::uint64_t seed = 0;

    void validate() const;
    std::string describe() const;
};

DetectorSpec build_detector_spec(AttackCategory category);

// Inverse class frequency, normalized so the two weights average to 1.
std::array<double, 2> inverse_frequency_weights(std::span<const std::uint8_t> labels);

// Candidate thresholds are the distinct probabilities inside (0,1) plus 0.5;
// the one with the highest F1 of (p >= t) wins, ties going to the lower threshold.
double optimize_threshold(std::span<const double> probs, std::span<const std::uint8_t> labels);

struct FoldStats {
    std::size_t train_rows = 0, train_positives = 0;
    std::size_t resampled_rows = 0, resampled_positives = 0;
    std::size_t validation_rows = 0, validation_positives = 0;
};

struct ThresholdRecord {
    double threshold = 0.5;
    std::vector<PrPoint> pr_curve;  // validation-fold curve the choice was made on
    double recall_at_half = 0, f1_at_half = 0;
    double recall_at_threshold = 0, f1_at_threshold = 0;
};

struct DetectorArtifact {
    DetectorSpec spec;
    std::uint64_t config_digest = 0;
    std::uint64_t schema_digest = 0;
    std::size_t input_width = 0;
    std::vector<Tensor> network_state;
    std::optional<RandomForest> forest;
    std::optional<GradientBoosting> boosting;
    std::optional<LogisticModel> logistic;
    ThresholdRecord threshold;
    std::vector<EpochRecord> history;
    std::uint64_t history_digest = 0;
    std::size_t best_epoch = 0;
    FoldStats folds;
    std::vector<std::string> warnings;

    bool has_members() const { return forest.has_value(); }
    Network build_network() const;
};

std::uint64_t digest_history(std::span<const EpochRecord> h);

// `categories` gives each row's category; positives are spec.category.
DetectorArtifact train_detector(const DetectorSpec& spec, const FeatureMatrix& x,
                                std::span<const AttackCategory> categories, std::uint64_t schema_digest,
                                std::uint64_t config_digest);

struct MemberScores {
    std::vector<double> neural, forest, boosting, logistic;
};
MemberScores member_scores(const DetectorArtifact& a, const FeatureMatrix& m);
std::vector<double> combine_members(const MemberScores& s, const std::array<double, 4>& weights);

// Ensemble probability when members exist, otherwise the neural probability.
std::vector<double> ensemble_score(const DetectorArtifact& a, const FeatureMatrix& m);

struct Detection {
    std::vector<double> probabilities;
    std::vector<std::uint8_t> decisions;
};
Detection detect(const DetectorArtifact& a, const FeatureMatrix& m);

std::string serialize_detector(const DetectorArtifact& a);
DetectorArtifact deserialize_detector(std::string_view payload);
std::uint64_t detector_digest(const DetectorArtifact& a);

}  // namespace nids
