#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nids/config.hpp"
#include "nids/evaluation.hpp"
#include "nids/meta.hpp"

namespace nids {

enum class TrainScope : std::uint8_t { Dos, Probe, R2l, U2r, Meta, All };
std::optional<TrainScope> parse_train_scope(std::string_view s);

// Raised when a pipeline stage fails; what() starts with "stage <name>: ".
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what) : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

// File layout under the artifact directory.
struct ArtifactLayout {
    std::filesystem::path root;

    std::filesystem::path sidecar() const { return root / "preprocess.txt"; }
    std::filesystem::path detector(AttackCategory c) const;
    std::filesystem::path meta() const { return root / "meta.nids"; }
    std::filesystem::path manifest() const { return root / "manifest.txt"; }
    std::filesystem::path reports() const { return root / "reports"; }
};

// Parses one of the configured files; in fast mode the rows are reduced to
// the stratified subsample.
LabeledDataset load_dataset(const ExperimentConfig& cfg, DatasetSource source);

// Prints class-distribution tables for every configured file. Returns false
// when a distribution deviates from the published counts.
bool cmd_ingest(const ExperimentConfig& cfg, std::ostream& out);

// Fits the vocabulary and scaler on the (possibly subsampled) training file
// and writes the sidecar.
PreprocessState cmd_preprocess(const ExperimentConfig& cfg, std::ostream& out);

void cmd_train(const ExperimentConfig& cfg, TrainScope scope, std::ostream& out);

struct EvaluationOutput {
    EvaluationReport report;
    std::optional<EvaluationReport> neural_only;  // ensemble detectors: the neural member at 0.5
    std::optional<ThresholdRecord> threshold;     // detectors: validation-fold threshold record
    std::vector<std::uint8_t> decisions;
};

// target: dos, probe, r2l, u2r or meta.
EvaluationOutput cmd_evaluate(const ExperimentConfig& cfg, DatasetSource dataset, std::string_view target,
                              std::ostream& out);

// Writes the verdict stream for `input` to `out`; malformed rows are reported
// on `err`. Returns the process exit code.
int cmd_score(const ExperimentConfig& cfg, const std::filesystem::path& input, std::ostream& out, std::ostream& err);

inline constexpr std::string_view kVerdictHeader = "row,p_dos,p_probe,p_r2l,p_u2r,p_anomaly,decision";

}  // namespace nids
