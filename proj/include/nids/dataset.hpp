#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nids/common.hpp"

namespace nids {

enum class AttackCategory : std::uint8_t { Normal = 0, DoS = 1, Probe = 2, R2L = 3, U2R = 4 };

inline constexpr std::size_t kCategoryCount = 5;
inline constexpr std::array<AttackCategory, 5> kAllCategories{
    AttackCategory::Normal, AttackCategory::DoS, AttackCategory::Probe, AttackCategory::R2L, AttackCategory::U2R};
// Canonical detector order; also the column order of meta features.
inline constexpr std::array<AttackCategory, 4> kAttackCategories{
    AttackCategory::DoS, AttackCategory::Probe, AttackCategory::R2L, AttackCategory::U2R};

std::string_view to_string(AttackCategory c);
std::optional<AttackCategory> parse_category(std::string_view s);
// "dos" / "probe" / "r2l" / "u2r"; used for CLI ids and file names.
std::string_view detector_id(AttackCategory c);
std::optional<AttackCategory> parse_detector_id(std::string_view s);
constexpr std::size_t index_of(AttackCategory c) { return static_cast<std::size_t>(c); }

// Fixed NSL-KDD schema: 41 features, three of them categorical.
inline constexpr std::size_t kFeatureCount = 41;
inline constexpr std::size_t kNumericCount = 38;
inline constexpr std::size_t kRowFieldCount = 43;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"};
inline constexpr std::array<std::size_t, 3> kCategoricalFields{1, 2, 3};
inline constexpr std::array<std::string_view, 3> kCategoricalNames{"protocol_type", "service", "flag"};

// Names of the 38 numeric features, schema order.
const std::array<std::string_view, kNumericCount>& numeric_feature_names();

struct RawRecord {
    std::array<double, kNumericCount> numeric{};
    std::array<std::string, 3> categorical;  // protocol_type, service, flag
    std::string attack_name;                 // empty for unlabeled rows
    int difficulty = 0;
    std::string feature_text;                // the 41 feature fields exactly as read
};

enum class DatasetSource : std::uint8_t { Train, TestPlus, Test21, Other };
std::string_view to_string(DatasetSource s);
std::optional<DatasetSource> parse_dataset_source(std::string_view s);

struct LabeledDataset {
    std::vector<RawRecord> records;
    std::vector<AttackCategory> categories;
    DatasetSource source = DatasetSource::Other;

    std::size_t size() const noexcept { return records.size(); }
};

class AttackMap {
public:
    // The canonical KDD taxonomy (same content as resources/attack_categories.txt).
    static AttackMap canonical();
    static AttackMap load(const std::filesystem::path& path);
    static AttackMap parse(std::string_view text, const std::string& origin = "<memory>");

    std::optional<AttackCategory> find(std::string_view name) const;
    std::size_t size() const noexcept { return names_.size(); }
    const std::map<std::string, AttackCategory, std::less<>>& entries() const noexcept { return names_; }

private:
    std::map<std::string, AttackCategory, std::less<>> names_;
};

std::string_view canonical_attack_map_text();

class UnknownAttackError : public Error {
public:
    explicit UnknownAttackError(std::vector<std::string> names);
    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<std::string> names_;
};

AttackCategory map_attack_category(std::string_view attack_name, const AttackMap& mapping);

// Parses the 41 feature fields of one row. Throws ParseError with `line`.
RawRecord parse_features(std::span<const std::string_view> fields, const std::string& origin, std::size_t line);

// Splits a CSV line on commas (no quoting in NSL-KDD); strips a trailing '\r'.
std::vector<std::string_view> split_fields(std::string_view line);

struct ParseOptions {
    DatasetSource source = DatasetSource::Other;
    // Drop the first row, as a loader that treats it as a header would.
    bool skip_first_row = false;
};

LabeledDataset parse_nslkdd(const std::filesystem::path& path, const AttackMap& mapping, ParseOptions opts = {});
LabeledDataset parse_nslkdd_text(std::string_view text, const AttackMap& mapping, ParseOptions opts = {},
                                 const std::string& origin = "<memory>");

// 43-field CSV line (no newline) with feature fields byte-identical to the input.
std::string serialize_record(const RawRecord& r);

// 1 iff category == target. Throws if target is Normal.
std::vector<std::uint8_t> binarize_labels(const LabeledDataset& d, AttackCategory target);
std::vector<std::uint8_t> binarize_labels(std::span<const AttackCategory> categories, AttackCategory target);
// Normal -> 0, any attack -> 1.
std::vector<std::uint8_t> anomaly_labels(std::span<const AttackCategory> categories);

struct ClassDistribution {
    std::array<std::size_t, kCategoryCount> counts{};
    std::size_t total = 0;

    std::size_t count(AttackCategory c) const { return counts[index_of(c)]; }
    double percent(AttackCategory c) const;
};

ClassDistribution class_distribution(const LabeledDataset& d);
ClassDistribution class_distribution(std::span<const AttackCategory> categories);

// Published class counts for the NSL-KDD files. Test splits publish R2L and
// U2R only as a combined figure, so `r2l_u2r` is set there instead.
struct ExpectedDistribution {
    std::size_t total = 0;
    std::size_t normal = 0, dos = 0, probe = 0;
    std::optional<std::size_t> r2l, u2r, r2l_u2r;
};

ExpectedDistribution expected_distribution(DatasetSource s);

struct DistributionCheck {
    bool ok = true;
    std::vector<std::string> mismatches;
    std::vector<std::string> notes;
};

// Compares observed counts with the published ones. The published training
// table lists one Normal record fewer than the canonical 125,973-row file;
// that specific offset is accepted and reported as a note.
DistributionCheck check_distribution(const ClassDistribution& observed, DatasetSource s);

std::string format_distribution(const ClassDistribution& d, std::string_view title);

}  // namespace nids
