#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nids {

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    std::size_t positives() const noexcept { return tp + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> labels);

// A ratio whose denominator may be zero; then value is 0 and degenerate is set.
struct Ratio {
    double value = 0.0;
    bool degenerate = false;
};

Ratio precision(const ConfusionMatrix& cm);
Ratio recall(const ConfusionMatrix& cm);
Ratio f1(const ConfusionMatrix& cm);
Ratio accuracy(const ConfusionMatrix& cm);

// decision_i = probs_i >= threshold
std::vector<std::uint8_t> apply_threshold(std::span<const double> probs, double threshold);

struct RocPoint {
    double fpr, tpr, threshold;
};
struct RocResult {
    double auc = 0.0;
    std::vector<RocPoint> curve;  // from (0,0) to (1,1)
};
RocResult roc_auc(std::span<const double> probs, std::span<const std::uint8_t> labels);

struct PrPoint {
    double recall, precision, threshold;
};
// One point per distinct probability, thresholds ascending.
std::vector<PrPoint> pr_curve(std::span<const double> probs, std::span<const std::uint8_t> labels);

struct ClassMetrics {
    Ratio precision, recall, f1;
    std::size_t support = 0;
};
struct ClassificationReport {
    std::array<ClassMetrics, 2> classes;  // index = class label
    Ratio accuracy;
};
ClassificationReport classification_report(std::span<const std::uint8_t> decisions,
                                           std::span<const std::uint8_t> labels);

struct EvaluationReport {
    std::string model;    // detector id or "meta"
    std::string dataset;  // dataset id
    std::uint64_t model_digest = 0;
    double threshold = 0.5;
    ConfusionMatrix confusion;
    Ratio accuracy, precision, recall, f1;
    double roc_auc = 0.0;
    bool roc_defined = false;  // false when the labels hold a single class
    std::vector<RocPoint> roc_curve;
    ClassificationReport per_class;
};

EvaluationReport evaluate(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold,
                          std::string model, std::string dataset, std::uint64_t model_digest);

std::string percent(double ratio);  // "97.49%"

// Human-readable table.
std::string format_report_text(const EvaluationReport& r);
// `key = value` lines; the key set is documented in docs/formats.md.
std::string format_report_kv(const EvaluationReport& r);
// Plot-ready 2x2 grid: actual,predicted_0,predicted_1.
std::string format_confusion_grid(const EvaluationReport& r);
std::string format_roc_curve(const EvaluationReport& r);

}  // namespace nids
