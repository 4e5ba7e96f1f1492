#include "nids/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <vector>

namespace nids {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw FormatError("not a non-negative integer: '" + std::string(s) + "'");
    return v;
}

bool parse_bool(std::string_view s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw FormatError("expected true or false, got '" + std::string(s) + "'");
}

std::vector<double> parse_list(std::string_view s, std::size_t n) {
    std::vector<double> out;
    while (true) {
        const auto comma = s.find(',');
        out.push_back(parse_double_exact(trim(s.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    if (out.size() != n) throw FormatError("expected " + std::to_string(n) + " comma-separated numbers");
    return out;
}

template <std::size_t N>
std::string format_list(const std::array<double, N>& v) {
    std::string s;
    for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

struct Field {
    std::string key;
    std::function<std::string()> get;
    std::function<void(std::string_view)> set;
};

void add_size(std::vector<Field>& f, std::string key, std::size_t& v) {
    f.push_back({std::move(key), [&v] { return std::to_string(v); }, [&v](std::string_view s) { v = parse_u64(s); }});
}
void add_double(std::vector<Field>& f, std::string key, double& v) {
    f.push_back({std::move(key), [&v] { return format_double(v); },
                 [&v](std::string_view s) { v = parse_double_exact(s); }});
}
void add_bool(std::vector<Field>& f, std::string key, bool& v) {
    f.push_back({std::move(key), [&v] { return std::string(v ? "true" : "false"); },
                 [&v](std::string_view s) { v = parse_bool(s); }});
}
void add_pair(std::vector<Field>& f, std::string key, std::array<double, 2>& v) {
    f.push_back({std::move(key), [&v] { return format_list(v); }, [&v](std::string_view s) {
                     const auto l = parse_list(s, 2);
                     v = {l[0], l[1]};
                 }});
}

void add_forest(std::vector<Field>& f, const std::string& p, ForestConfig& c) {
    add_size(f, p + "n_trees", c.n_trees);
    add_size(f, p + "max_depth", c.max_depth);
    add_pair(f, p + "class_weight", c.class_weight);
    add_size(f, p + "max_features", c.max_features);
    add_bool(f, p + "bootstrap", c.bootstrap);
    add_size(f, p + "min_samples_split", c.min_samples_split);
}

void add_detector(std::vector<Field>& f, const std::string& p, DetectorSpec& d) {
    add_double(f, p + "width_scale", d.width_scale);
    f.push_back({p + "resample.method", [&d] { return std::string(to_string(d.resample.method)); },
                 [&d](std::string_view s) {
                     const auto m = parse_resample_method(s);
                     if (!m) throw FormatError("unknown resample method '" + std::string(s) + "'");
                     d.resample.method = *m;
                 }});
    add_size(f, p + "resample.k_neighbors", d.resample.k_neighbors);
    add_double(f, p + "resample.target_ratio", d.resample.target_ratio);
    add_double(f, p + "loss.alpha", d.loss.alpha);
    add_double(f, p + "loss.gamma", d.loss.gamma);
    add_double(f, p + "loss.recall_boost", d.loss.recall_boost);
    add_double(f, p + "loss.penalty_factor", d.loss.penalty_factor);
    auto& t = d.train;
    add_size(f, p + "train.epochs", t.epochs);
    add_size(f, p + "train.batch_size", t.batch_size);
    add_double(f, p + "train.learning_rate", t.learning_rate);
    add_double(f, p + "train.adam.beta1", t.adam.beta1);
    add_double(f, p + "train.adam.beta2", t.adam.beta2);
    add_double(f, p + "train.adam.epsilon", t.adam.epsilon);
    f.push_back({p + "train.schedule",
                 [&t] { return std::string(t.schedule.kind == LrScheduleKind::Constant ? "constant" : "plateau"); },
                 [&t](std::string_view s) {
                     if (s == "constant") t.schedule.kind = LrScheduleKind::Constant;
                     else if (s == "plateau") t.schedule.kind = LrScheduleKind::ReduceOnPlateau;
                     else throw FormatError("expected constant or plateau, got '" + std::string(s) + "'");
                 }});
    add_double(f, p + "train.schedule.factor", t.schedule.factor);
    add_size(f, p + "train.schedule.patience", t.schedule.patience);
    add_double(f, p + "train.schedule.min_lr", t.schedule.min_lr);
    add_size(f, p + "train.patience", t.patience);
    f.push_back({p + "train.monitor", [&t] { return std::string(to_string(t.monitor)); }, [&t](std::string_view s) {
                     const auto m = parse_monitor(s);
                     if (!m) throw FormatError("expected val_loss or val_f1, got '" + std::string(s) + "'");
                     t.monitor = *m;
                 }});
    add_bool(f, p + "train.restore_best", t.restore_best);
    add_double(f, p + "train.validation_fraction", t.validation_fraction);
    add_bool(f, p + "cost_sensitive", d.cost_sensitive);
    auto& e = d.ensemble;
    add_bool(f, p + "ensemble.enabled", e.enabled);
    f.push_back({p + "ensemble.weights", [&e] { return format_list(e.weights); }, [&e](std::string_view s) {
                     const auto l = parse_list(s, 4);
                     std::copy(l.begin(), l.end(), e.weights.begin());
                 }});
    add_bool(f, p + "ensemble.members_on_resampled", e.members_on_resampled);
    add_forest(f, p + "ensemble.forest.", e.forest);
    add_size(f, p + "ensemble.boosting.n_estimators", e.boosting.n_estimators);
    add_size(f, p + "ensemble.boosting.max_depth", e.boosting.max_depth);
    add_double(f, p + "ensemble.boosting.learning_rate", e.boosting.learning_rate);
    add_size(f, p + "ensemble.boosting.min_samples_split", e.boosting.min_samples_split);
    add_size(f, p + "ensemble.logistic.max_iterations", e.logistic.max_iterations);
    add_pair(f, p + "ensemble.logistic.class_weight", e.logistic.class_weight);
    add_double(f, p + "ensemble.logistic.tolerance", e.logistic.tolerance);
    add_double(f, p + "ensemble.logistic.l2", e.logistic.l2);
    add_bool(f, p + "ensemble.logistic.fit_intercept", e.logistic.fit_intercept);
    f.push_back({p + "threshold",
                 [&d] {
                     return d.threshold.kind == ThresholdKind::OptimizeF1 ? std::string("optimize_f1")
                                                                          : format_double(d.threshold.fixed);
                 },
                 [&d](std::string_view s) {
                     if (s == "optimize_f1") {
                         d.threshold.kind = ThresholdKind::OptimizeF1;
                     } else {
                         d.threshold.kind = ThresholdKind::Fixed;
                         d.threshold.fixed = parse_double_exact(s);
                     }
                 }});
    f.push_back({p + "negatives", [&d] { return std::string(d.negatives == NegativePolicy::AllOthers ? "all" : "normal"); },
                 [&d](std::string_view s) {
                     if (s == "all") d.negatives = NegativePolicy::AllOthers;
                     else if (s == "normal") d.negatives = NegativePolicy::NormalOnly;
                     else throw FormatError("expected all or normal, got '" + std::string(s) + "'");
                 }});
}

std::vector<Field> settings(ExperimentConfig& c) {
    std::vector<Field> f;
    f.push_back({"seed", [&c] { return c.seed ? std::to_string(*c.seed) : std::string(); },
                 [&c](std::string_view s) { c.seed = parse_u64(s); }});
    add_bool(f, "data.skip_first_row", c.skip_first_row);
    add_double(f, "fast.fraction", c.fast.fraction);
    add_size(f, "fast.min_per_category", c.fast.min_per_category);
    add_size(f, "fast.max_epochs", c.fast.max_epochs);
    add_double(f, "fast.width_scale", c.fast.width_scale);
    add_size(f, "fast.max_trees", c.fast.max_trees);
    add_size(f, "meta.folds", c.meta.folds);
    add_forest(f, "meta.forest.", c.meta.forest);
    for (std::size_t j = 0; j < 4; ++j)
        add_detector(f, "detector." + std::string(detector_id(kAttackCategories[j])) + ".", c.detectors[j]);
    return f;
}

std::filesystem::path* path_field(ExperimentPaths& p, std::string_view key) {
    if (key == "paths.train") return &p.train;
    if (key == "paths.test_plus") return &p.test_plus;
    if (key == "paths.test_21") return &p.test_21;
    if (key == "paths.mapping") return &p.mapping;
    if (key == "paths.artifacts") return &p.artifacts;
    return nullptr;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
    for (std::size_t j = 0; j < 4; ++j) detectors[j] = build_detector_spec(kAttackCategories[j]);
    paths.train = "data/KDDTrain+.txt";
    paths.test_plus = "data/KDDTest+.txt";
    paths.test_21 = "data/KDDTest-21.txt";
    paths.artifacts = "artifacts";
}

void ExperimentConfig::set(std::string_view key, std::string_view value, const std::filesystem::path& base_dir) {
    if (auto* p = path_field(paths, key)) {
        std::filesystem::path v{std::string(value)};
        *p = v.empty() || v.is_absolute() ? v : (base_dir / v).lexically_normal();
        return;
    }
    for (auto& f : settings(*this))
        if (f.key == key) {
            try {
                f.set(value);
            } catch (const Error& e) {
                throw FormatError(std::string(key) + ": " + e.what());
            }
            return;
        }
    throw FormatError("unknown config key '" + std::string(key) + "'");
}

ExperimentConfig ExperimentConfig::parse(std::string_view text, const std::filesystem::path& base_dir,
                                         const std::string& origin) {
    ExperimentConfig c;
    c.set("paths.train", "data/KDDTrain+.txt", base_dir);
    c.set("paths.test_plus", "data/KDDTest+.txt", base_dir);
    c.set("paths.test_21", "data/KDDTest-21.txt", base_dir);
    c.set("paths.artifacts", "artifacts", base_dir);
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(origin, line_no, "expected key = value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (!seen.insert(std::string(key)).second) throw ParseError(origin, line_no, "duplicate key '" + std::string(key) + "'");
        try {
            c.set(key, value, base_dir);
        } catch (const FormatError& e) {
            throw ParseError(origin, line_no, e.what());
        }
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    const auto text = read_file(path);
    auto base = std::filesystem::absolute(path).parent_path();
    return parse(text, base, path.string());
}

void ExperimentConfig::validate() const {
    require_seed();
    if (!(fast.fraction >= 0.0 && fast.fraction <= 1.0)) throw Error("config: fast.fraction must be in [0,1]");
    if (!(fast.width_scale > 0.0)) throw Error("config: fast.width_scale must be positive");
    if (meta.folds < 2) throw Error("config: meta.folds must be at least 2");
    meta.forest.validate();
    if (paths.artifacts.empty()) throw Error("config: paths.artifacts is empty");
    for (auto c : kAttackCategories) effective_detector(c).validate();
}

std::string ExperimentConfig::effective_text() const {
    ExperimentConfig copy = *this;
    std::map<std::string, std::string> kv;
    for (const auto& f : settings(copy)) kv[f.key] = f.get();
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::uint64_t ExperimentConfig::digest() const { return nids::digest(effective_text()); }

std::uint64_t ExperimentConfig::require_seed() const {
    if (!seed) throw Error("config: 'seed' is required (set it in the config file or pass --seed)");
    return *seed;
}

DetectorSpec ExperimentConfig::effective_detector(AttackCategory c) const {
    const auto it = std::find(kAttackCategories.begin(), kAttackCategories.end(), c);
    if (it == kAttackCategories.end()) throw Error("config: no detector for " + std::string(to_string(c)));
    const auto j = static_cast<std::size_t>(it - kAttackCategories.begin());
    DetectorSpec s = detectors[j];
    s.category = c;
    s.seed = mix_seed(require_seed(), 0xde7 + j);
    if (fast.enabled()) {
        s.train.epochs = std::min(s.train.epochs, fast.max_epochs);
        s.width_scale = std::min(s.width_scale, fast.width_scale);
        s.ensemble.forest.n_trees = std::min(s.ensemble.forest.n_trees, fast.max_trees);
        s.ensemble.boosting.n_estimators = std::min(s.ensemble.boosting.n_estimators, fast.max_trees);
    }
    return s;
}

ForestConfig ExperimentConfig::effective_meta_forest() const {
    ForestConfig f = meta.forest;
    f.rng_seed = mix_seed(require_seed(), 0x3e7a);
    if (fast.enabled()) f.n_trees = std::min(f.n_trees, fast.max_trees);
    return f;
}

AttackMap ExperimentConfig::attack_map() const {
    return paths.mapping.empty() ? AttackMap::canonical() : AttackMap::load(paths.mapping);
}

std::string default_config_text() {
    ExperimentConfig c;
    c.seed = 42;
    std::string out =
        "# Paths are relative to this file.\n"
        "paths.train = data/KDDTrain+.txt\n"
        "paths.test_plus = data/KDDTest+.txt\n"
        "paths.test_21 = data/KDDTest-21.txt\n"
        "paths.artifacts = artifacts\n"
        "# paths.mapping = resources/attack_categories.txt\n\n";
    out += c.effective_text();
    return out;
}

}  // namespace nids
