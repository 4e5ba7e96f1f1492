#include "nids/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "nids/kernels.hpp"

namespace nids {

FeatureMatrix::FeatureMatrix(std::size_t r, std::size_t c, std::vector<std::string> names)
    : rows(r), cols(c), values(r * c, 0.0), column_names(std::move(names)) {
    if (column_names.empty()) {
        column_names.reserve(c);
        for (std::size_t i = 0; i < c; ++i) column_names.push_back("f" + std::to_string(i));
    }
    if (column_names.size() != c) throw ShapeError("FeatureMatrix: column name count does not match width");
}

bool FeatureMatrix::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> idx) const {
    FeatureMatrix out(idx.size(), cols, column_names);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= rows) throw ShapeError("select_rows: row index out of range");
        std::copy_n(values.data() + idx[i] * cols, cols, out.values.data() + i * cols);
    }
    return out;
}

std::uint64_t schema_digest(std::span<const std::string> column_names) {
    Fnv1a h;
    for (const auto& n : column_names) h.update(n).update(std::string_view("\n", 1));
    return h.value();
}

std::size_t CategoryVocabulary::find(std::size_t f, std::string_view value) const {
    const auto& v = values[f];
    auto it = std::lower_bound(v.begin(), v.end(), value);
    if (it == v.end() || *it != value) return std::string::npos;
    return static_cast<std::size_t>(it - v.begin());
}

CategoryVocabulary build_vocabulary(std::span<const LabeledDataset* const> datasets) {
    std::array<std::set<std::string, std::less<>>, 3> seen;
    for (const auto* d : datasets)
        for (const auto& r : d->records)
            for (std::size_t f = 0; f < 3; ++f)
                if (seen[f].find(r.categorical[f]) == seen[f].end()) seen[f].insert(r.categorical[f]);
    CategoryVocabulary v;
    for (std::size_t f = 0; f < 3; ++f) v.values[f].assign(seen[f].begin(), seen[f].end());
    return v;
}

CategoryVocabulary build_vocabulary(const LabeledDataset& train, const LabeledDataset& test) {
    const std::array<const LabeledDataset*, 2> both{&train, &test};
    return build_vocabulary(both);
}

namespace {
std::vector<std::string> encoded_column_names(const CategoryVocabulary& vocab) {
    std::vector<std::string> names;
    for (auto n : numeric_feature_names()) names.emplace_back(n);
    for (std::size_t f = 0; f < 3; ++f)
        for (const auto& v : vocab.values[f]) names.push_back(std::string(kCategoricalNames[f]) + "=" + v);
    return names;
}
}  // namespace

FeatureMatrix one_hot_encode(std::span<const RawRecord> records, const CategoryVocabulary& vocab) {
    FeatureMatrix m(records.size(), kNumericCount + vocab.width(), encoded_column_names(vocab));
    std::array<std::size_t, 3> offset{kNumericCount, kNumericCount + vocab.values[0].size(),
                                      kNumericCount + vocab.values[0].size() + vocab.values[1].size()};
    for (std::size_t r = 0; r < records.size(); ++r) {
        auto row = m.row(r);
        std::copy(records[r].numeric.begin(), records[r].numeric.end(), row.begin());
        for (std::size_t f = 0; f < 3; ++f) {
            const auto pos = vocab.find(f, records[r].categorical[f]);
            if (pos == std::string::npos)
                throw Error("one_hot_encode: value '" + records[r].categorical[f] + "' of feature '" +
                            std::string(kCategoricalNames[f]) + "' is not in the vocabulary (row " +
                            std::to_string(r) + ")");
            row[offset[f] + pos] = 1.0;
        }
    }
    return m;
}

FeatureMatrix one_hot_encode(const LabeledDataset& d, const CategoryVocabulary& vocab) {
    return one_hot_encode(d.records, vocab);
}

ScalerParams fit_scaler(const FeatureMatrix& train, std::string fitted_on) {
    if (train.rows < 2) throw Error("fit_scaler: need at least two rows");
    ScalerParams p;
    p.fitted_on = std::move(fitted_on);
    p.mean.assign(train.cols, 0.0);
    p.stddev.assign(train.cols, 0.0);
    // Welford per column; columns are independent.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(train.cols); ++c) {
        double mean = 0.0, m2 = 0.0;
        for (std::size_t r = 0; r < train.rows; ++r) {
            const double x = train.values[r * train.cols + c];
            const double delta = x - mean;
            mean += delta / static_cast<double>(r + 1);
            m2 += delta * (x - mean);
        }
        p.mean[c] = mean;
        p.stddev[c] = std::sqrt(std::max(0.0, m2 / static_cast<double>(train.rows)));
    }
    return p;
}

FeatureMatrix apply_scaler(const FeatureMatrix& m, const ScalerParams& p) {
    if (p.mean.size() != m.cols || p.stddev.size() != m.cols)
        throw ShapeError("apply_scaler: matrix has " + std::to_string(m.cols) + " columns, scaler has " +
                         std::to_string(p.mean.size()));
    FeatureMatrix out = m;
    kernels::standardize(out.rows, out.cols, out.values.data(), p.mean.data(), p.stddev.data());
    return out;
}

FeatureMatrix invert_scaler(const FeatureMatrix& m, const ScalerParams& p) {
    if (p.mean.size() != m.cols) throw ShapeError("invert_scaler: column count mismatch");
    FeatureMatrix out = m;
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c) {
            double& v = out.at(r, c);
            v = p.stddev[c] > 0.0 ? v * p.stddev[c] + p.mean[c] : p.mean[c];
        }
    return out;
}

FeatureMatrix PreprocessState::transform(std::span<const RawRecord> records) const {
    auto encoded = one_hot_encode(records, vocab);
    if (encoded.column_names != column_names) throw ShapeError("preprocess: encoded columns differ from the fitted schema");
    return apply_scaler(encoded, scaler);
}

PreprocessState fit_preprocess(const LabeledDataset& train, std::span<const LabeledDataset* const> vocab_sources) {
    PreprocessState s;
    s.vocab = build_vocabulary(vocab_sources);
    auto encoded = one_hot_encode(train, s.vocab);
    s.column_names = encoded.column_names;
    s.scaler = fit_scaler(encoded, std::string(to_string(train.source)));
    return s;
}

// ---------------------------------------------------------------------------

std::string format_sidecar(const PreprocessState& s) {
    std::ostringstream os;
    os << "# nids preprocessing sidecar\n";
    os << "version = " << kSidecarVersion << "\n";
    for (std::size_t f = 0; f < 3; ++f) {
        os << "vocab." << kCategoricalNames[f] << " = ";
        for (std::size_t i = 0; i < s.vocab.values[f].size(); ++i) os << (i ? "," : "") << s.vocab.values[f][i];
        os << "\n";
    }
    os << "scaler.fitted_on = " << s.scaler.fitted_on << "\n";
    os << "scaler.std = population\n";
    os << "columns = " << s.column_names.size() << "\n";
    for (std::size_t c = 0; c < s.column_names.size(); ++c)
        os << "column." << c << " = " << s.column_names[c] << " " << format_hexfloat(s.scaler.mean[c]) << " "
           << format_hexfloat(s.scaler.stddev[c]) << "\n";
    return os.str();
}

PreprocessState parse_sidecar(std::string_view text, const std::string& origin) {
    std::map<std::string, std::string, std::less<>> kv;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw ParseError(origin, line_no, "expected `key = value`");
        if (!kv.emplace(line.substr(0, eq), line.substr(eq + 3)).second)
            throw ParseError(origin, line_no, "duplicate key '" + line.substr(0, eq) + "'");
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError(origin + ": missing key '" + key + "'");
        return it->second;
    };
    if (get("version") != std::to_string(kSidecarVersion))
        throw FormatError(origin + ": unsupported sidecar version " + get("version"));
    PreprocessState s;
    for (std::size_t f = 0; f < 3; ++f) {
        const auto& list = get("vocab." + std::string(kCategoricalNames[f]));
        std::stringstream ss(list);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) s.vocab.values[f].push_back(item);
        if (!std::is_sorted(s.vocab.values[f].begin(), s.vocab.values[f].end()))
            throw FormatError(origin + ": vocabulary for " + std::string(kCategoricalNames[f]) + " is not sorted");
    }
    s.scaler.fitted_on = get("scaler.fitted_on");
    if (get("scaler.std") != "population") throw FormatError(origin + ": unsupported scaler.std");
    const auto n = std::stoul(get("columns"));
    for (std::size_t c = 0; c < n; ++c) {
        std::istringstream cs(get("column." + std::to_string(c)));
        std::string name, mean, sd;
        if (!(cs >> name >> mean >> sd)) throw FormatError(origin + ": bad column." + std::to_string(c));
        s.column_names.push_back(name);
        s.scaler.mean.push_back(parse_double_exact(mean));
        s.scaler.stddev.push_back(parse_double_exact(sd));
    }
    if (kNumericCount + s.vocab.width() != n) throw FormatError(origin + ": column count does not match vocabulary");
    if (kv.size() != 7 + n) throw FormatError(origin + ": unexpected keys");
    if (s.column_names != encoded_column_names(s.vocab))
        throw FormatError(origin + ": column names do not match the vocabulary");
    return s;
}

void save_sidecar(const std::filesystem::path& path, const PreprocessState& s) {
    write_file_atomic(path, format_sidecar(s));
}

PreprocessState load_sidecar(const std::filesystem::path& path) { return parse_sidecar(read_file(path), path.string()); }

}  // namespace nids
