#include "nids/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace nids {

namespace {

constexpr std::array<std::string_view, 5> kCategoryNames{"Normal", "DoS", "Probe", "R2L", "U2R"};
constexpr std::array<std::string_view, 5> kDetectorIds{"normal", "dos", "probe", "r2l", "u2r"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string_view to_string(AttackCategory c) { return kCategoryNames[index_of(c)]; }

std::optional<AttackCategory> parse_category(std::string_view s) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        const auto& n = kCategoryNames[i];
        if (s.size() == n.size() &&
            std::equal(s.begin(), s.end(), n.begin(), [](char a, char b) { return std::tolower(a) == std::tolower(b); }))
            return static_cast<AttackCategory>(i);
    }
    return std::nullopt;
}

std::string_view detector_id(AttackCategory c) { return kDetectorIds[index_of(c)]; }

std::optional<AttackCategory> parse_detector_id(std::string_view s) {
    for (auto c : kAttackCategories)
        if (detector_id(c) == s) return c;
    return std::nullopt;
}

const std::array<std::string_view, kNumericCount>& numeric_feature_names() {
    static const auto names = [] {
        std::array<std::string_view, kNumericCount> out{};
        std::size_t j = 0;
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            if (i < 1 || i > 3) out[j++] = kFeatureNames[i];
        return out;
    }();
    return names;
}

std::string_view to_string(DatasetSource s) {
    switch (s) {
        case DatasetSource::Train: return "train";
        case DatasetSource::TestPlus: return "test_plus";
        case DatasetSource::Test21: return "test_21";
        case DatasetSource::Other: break;
    }
    return "other";
}

std::optional<DatasetSource> parse_dataset_source(std::string_view s) {
    if (s == "train") return DatasetSource::Train;
    if (s == "test_plus") return DatasetSource::TestPlus;
    if (s == "test_21") return DatasetSource::Test21;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

AttackMap AttackMap::canonical() { return parse(canonical_attack_map_text(), "<canonical>"); }

AttackMap AttackMap::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open attack mapping file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

AttackMap AttackMap::parse(std::string_view text, const std::string& origin) {
    AttackMap m;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string_view::npos) throw ParseError(origin, line_no, "expected `attack_name,category`");
        const auto name = trim(line.substr(0, comma));
        const auto cat_text = trim(line.substr(comma + 1));
        const auto cat = parse_category(cat_text);
        if (name.empty() || !cat) throw ParseError(origin, line_no, "bad mapping entry '" + std::string(line) + "'");
        auto [it, inserted] = m.names_.emplace(std::string(name), *cat);
        if (!inserted && it->second != *cat)
            throw ParseError(origin, line_no, "attack '" + std::string(name) + "' mapped to two categories");
    }
    return m;
}

std::optional<AttackCategory> AttackMap::find(std::string_view name) const {
    if (name == "normal") return AttackCategory::Normal;
    auto it = names_.find(name);
    if (it == names_.end()) return std::nullopt;
    return it->second;
}

namespace {
std::string join_names(const std::vector<std::string>& names) {
    std::string s;
    for (const auto& n : names) {
        if (!s.empty()) s += ", ";
        s += n;
    }
    return s;
}
}  // namespace

UnknownAttackError::UnknownAttackError(std::vector<std::string> names)
    : Error("attack name(s) missing from the category mapping: " + join_names(names)), names_(std::move(names)) {}

AttackCategory map_attack_category(std::string_view attack_name, const AttackMap& mapping) {
    auto c = mapping.find(attack_name);
    if (!c) throw UnknownAttackError({std::string(attack_name)});
    return *c;
}

// ---------------------------------------------------------------------------

std::vector<std::string_view> split_fields(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> out;
    out.reserve(kRowFieldCount);
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

RawRecord parse_features(std::span<const std::string_view> fields, const std::string& origin, std::size_t line) {
    if (fields.size() < kFeatureCount)
        throw ParseError(origin, line, "expected 41 feature fields, got " + std::to_string(fields.size()));
    RawRecord r;
    std::size_t numeric = 0;
    std::size_t text_len = kFeatureCount - 1;
    for (std::size_t i = 0; i < kFeatureCount; ++i) text_len += fields[i].size();
    r.feature_text.reserve(text_len);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (i) r.feature_text += ',';
        r.feature_text += fields[i];
        if (i >= 1 && i <= 3) {
            if (fields[i].empty())
                throw ParseError(origin, line, "empty categorical field '" + std::string(kFeatureNames[i]) + "'");
            r.categorical[i - 1] = std::string(fields[i]);
        } else {
            if (!parse_double(fields[i], r.numeric[numeric]))
                throw ParseError(origin, line,
                                 "field '" + std::string(kFeatureNames[i]) + "' is not numeric: '" +
                                     std::string(fields[i]) + "'");
            ++numeric;
        }
    }
    return r;
}

LabeledDataset parse_nslkdd_text(std::string_view text, const AttackMap& mapping, ParseOptions opts,
                                 const std::string& origin) {
    LabeledDataset d;
    d.source = opts.source;
    std::set<std::string> unknown;
    std::size_t line_no = 0;
    bool first = true;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (trim(line).empty()) continue;
        if (first && opts.skip_first_row) {
            first = false;
            continue;
        }
        first = false;
        const auto fields = split_fields(line);
        if (fields.size() != kRowFieldCount)
            throw ParseError(origin, line_no,
                             "expected 43 comma-separated fields, got " + std::to_string(fields.size()));
        RawRecord r = parse_features(fields, origin, line_no);
        r.attack_name = std::string(fields[41]);
        const auto diff = fields[42];
        auto [ptr, ec] = std::from_chars(diff.data(), diff.data() + diff.size(), r.difficulty);
        if (ec != std::errc{} || ptr != diff.data() + diff.size() || r.difficulty < 0 || r.difficulty > 21)
            throw ParseError(origin, line_no, "difficulty must be an integer in 0..21, got '" + std::string(diff) + "'");
        if (r.attack_name.empty()) throw ParseError(origin, line_no, "empty attack name");
        auto cat = mapping.find(r.attack_name);
        if (!cat) {
            unknown.insert(r.attack_name);
            cat = AttackCategory::Normal;
        }
        d.categories.push_back(*cat);
        d.records.push_back(std::move(r));
    }
    if (!unknown.empty()) throw UnknownAttackError({unknown.begin(), unknown.end()});
    if (d.records.empty()) throw ParseError(origin, 0, "no records");
    return d;
}

LabeledDataset parse_nslkdd(const std::filesystem::path& path, const AttackMap& mapping, ParseOptions opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dataset file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_nslkdd_text(ss.str(), mapping, opts, path.string());
}

std::string serialize_record(const RawRecord& r) {
    return r.feature_text + "," + r.attack_name + "," + std::to_string(r.difficulty);
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> binarize_labels(std::span<const AttackCategory> categories, AttackCategory target) {
    if (target == AttackCategory::Normal) throw Error("binarize_labels: target must be an attack category");
    std::vector<std::uint8_t> y(categories.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = categories[i] == target ? 1 : 0;
    return y;
}

std::vector<std::uint8_t> binarize_labels(const LabeledDataset& d, AttackCategory target) {
    return binarize_labels(d.categories, target);
}

std::vector<std::uint8_t> anomaly_labels(std::span<const AttackCategory> categories) {
    std::vector<std::uint8_t> y(categories.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = categories[i] == AttackCategory::Normal ? 0 : 1;
    return y;
}

double ClassDistribution::percent(AttackCategory c) const {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(count(c)) / static_cast<double>(total);
}

ClassDistribution class_distribution(std::span<const AttackCategory> categories) {
    ClassDistribution d;
    for (auto c : categories) ++d.counts[index_of(c)];
    d.total = categories.size();
    return d;
}

ClassDistribution class_distribution(const LabeledDataset& d) { return class_distribution(d.categories); }

ExpectedDistribution expected_distribution(DatasetSource s) {
    ExpectedDistribution e;
    switch (s) {
        case DatasetSource::Train:
            e.total = 125'972;
            e.normal = 67'342;
            e.dos = 45'927;
            e.probe = 11'656;
            e.r2l = 995;
            e.u2r = 52;
            break;
        case DatasetSource::TestPlus:
            e.total = 22'544;
            e.normal = 9'711;
            e.dos = 7'460;
            e.probe = 2'421;
            e.r2l_u2r = 2'952;
            break;
        case DatasetSource::Test21:
            e.total = 11'850;
            e.normal = 2'152;
            e.dos = 4'344;
            e.probe = 2'402;
            e.r2l_u2r = 2'952;
            break;
        case DatasetSource::Other:
            throw Error("no published distribution for an unnamed dataset");
    }
    return e;
}

DistributionCheck check_distribution(const ClassDistribution& observed, DatasetSource s) {
    const auto e = expected_distribution(s);
    DistributionCheck out;
    auto expect = [&](std::string_view what, std::size_t want, std::size_t got) {
        if (want != got) {
            out.ok = false;
            out.mismatches.push_back(std::string(what) + ": expected " + std::to_string(want) + ", observed " +
                                     std::to_string(got));
        }
    };
    const auto normal = observed.count(AttackCategory::Normal);
    const bool header_offset = s == DatasetSource::Train && normal == e.normal + 1 && observed.total == e.total + 1;
    if (header_offset) {
        out.notes.push_back("published table lists " + std::to_string(e.normal) + " Normal / " +
                            std::to_string(e.total) + " total; the file has " + std::to_string(normal) + " / " +
                            std::to_string(observed.total) +
                            " (the first row, a Normal record, is missing from the published counts)");
    } else {
        expect("total", e.total, observed.total);
        expect("Normal", e.normal, normal);
    }
    expect("DoS", e.dos, observed.count(AttackCategory::DoS));
    expect("Probe", e.probe, observed.count(AttackCategory::Probe));
    if (e.r2l) expect("R2L", *e.r2l, observed.count(AttackCategory::R2L));
    if (e.u2r) expect("U2R", *e.u2r, observed.count(AttackCategory::U2R));
    if (e.r2l_u2r)
        expect("R2L+U2R", *e.r2l_u2r, observed.count(AttackCategory::R2L) + observed.count(AttackCategory::U2R));
    return out;
}

std::string format_distribution(const ClassDistribution& d, std::string_view title) {
    std::ostringstream os;
    os << title << "\n";
    os << std::left << std::setw(10) << "Class" << std::right << std::setw(10) << "Count" << std::setw(12)
       << "Percentage" << "\n";
    for (auto c : kAllCategories) {
        os << std::left << std::setw(10) << to_string(c) << std::right << std::setw(10) << d.count(c)
           << std::setw(11) << std::fixed << std::setprecision(2) << d.percent(c) << "%\n";
    }
    os << std::left << std::setw(10) << "Total" << std::right << std::setw(10) << d.total << "\n";
    return os.str();
}

}  // namespace nids
