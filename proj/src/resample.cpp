#include "nids/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nids/kernels.hpp"
#include "nids/rng.hpp"

namespace nids {

std::string_view to_string(ResampleMethod m) {
    switch (m) {
        case ResampleMethod::None: return "none";
        case ResampleMethod::Smote: return "smote";
        case ResampleMethod::Adasyn: return "adasyn";
        case ResampleMethod::BorderlineSmote: return "borderline_smote";
    }
    return "none";
}

std::optional<ResampleMethod> parse_resample_method(std::string_view s) {
    for (auto m : {ResampleMethod::None, ResampleMethod::Smote, ResampleMethod::Adasyn, ResampleMethod::BorderlineSmote})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

std::size_t synthetic_count(std::size_t minority, std::size_t majority, double target_ratio) {
    const double want = std::ceil(target_ratio * static_cast<double>(majority) - 1e-9);
    if (want <= static_cast<double>(minority)) return 0;
    return static_cast<std::size_t>(want) - minority;
}

std::vector<std::size_t> uniform_allocation(std::size_t n, std::size_t total, std::uint64_t seed) {
    std::vector<std::size_t> out(n, n ? total / n : 0);
    if (n == 0) return out;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    for (std::size_t i = 0; i < total % n; ++i) ++out[order[i]];
    return out;
}

std::vector<std::size_t> proportional_allocation(std::span<const double> weights, std::size_t total) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> out(weights.size(), 0);
    if (sum <= 0.0 || weights.empty()) return out;
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = weights[i] / sum * static_cast<double>(total);
        out[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += out[i];
        remainder.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainder.begin(), remainder.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total && i < remainder.size(); ++i, ++assigned) ++out[remainder[i].second];
    return out;
}

BorderlineClass classify_borderline(std::size_t majority_neighbors, std::size_t k) {
    if (majority_neighbors >= k) return BorderlineClass::Noise;
    if (2 * majority_neighbors >= k) return BorderlineClass::Danger;
    return BorderlineClass::Safe;
}

namespace {

struct Split {
    std::vector<std::size_t> minority, majority;
};

Split split_classes(const FeatureMatrix& m, std::span<const std::uint8_t> labels) {
    if (labels.size() != m.rows) throw ShapeError("resample: label count does not match matrix rows");
    Split s;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? s.minority : s.majority).push_back(i);
    return s;
}

void require_neighbors(std::size_t minority, std::size_t k) {
    if (k == 0) throw Error("resample: k_neighbors must be positive");
    if (minority < k + 1)
        throw Error("resample: minority class has " + std::to_string(minority) + " samples but k_neighbors=" +
                    std::to_string(k) + " needs at least " + std::to_string(k + 1) + "; lower k_neighbors");
}

ResampleResult passthrough(const FeatureMatrix& m, std::span<const std::uint8_t> labels) {
    ResampleResult r;
    r.matrix = m;
    r.labels.assign(labels.begin(), labels.end());
    r.original_rows = m.rows;
    return r;
}

// Appends allocation[i] synthetic rows for each seeds[i], interpolating
// toward one of its k nearest minority neighbours.
ResampleResult generate(const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                        std::span<const std::size_t> seeds, std::span<const std::size_t> allocation,
                        std::span<const std::size_t> minority, std::size_t k, std::uint64_t seed) {
    ResampleResult r = passthrough(m, labels);
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < seeds.size(); ++i)
        if (allocation[i] > 0) active.push_back(seeds[i]);
    std::vector<std::size_t> nn(active.size() * k);
    std::vector<double> dist(active.size() * k);
    kernels::knn(m.values.data(), m.cols, active, minority, k, nn.data(), dist.data());

    const std::size_t total = std::accumulate(allocation.begin(), allocation.end(), std::size_t{0});
    r.matrix.values.reserve((m.rows + total) * m.cols);
    r.origins.reserve(total);
    Rng rng(mix_seed(seed, 0x5307e));
    std::size_t a = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (allocation[i] == 0) continue;
        const auto x = m.row(seeds[i]);
        for (std::size_t s = 0; s < allocation[i]; ++s) {
            const std::size_t partner = nn[a * k + rng.index(k)];
            const double lambda = rng.uniform();
            const auto y = m.row(partner);
            for (std::size_t c = 0; c < m.cols; ++c) r.matrix.values.push_back(x[c] + lambda * (y[c] - x[c]));
            r.labels.push_back(1);
            r.origins.push_back({seeds[i], partner, lambda});
        }
        ++a;
    }
    r.matrix.rows = m.rows + total;
    return r;
}

}  // namespace

std::vector<double> majority_fraction(const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                                      std::span<const std::size_t> minority_rows, std::size_t k) {
    if (m.rows < k + 1) throw Error("resample: fewer rows than k_neighbors + 1");
    std::vector<std::size_t> all(m.rows);
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> nn(minority_rows.size() * k);
    std::vector<double> dist(minority_rows.size() * k);
    kernels::knn(m.values.data(), m.cols, minority_rows, all, k, nn.data(), dist.data());
    std::vector<double> out(minority_rows.size());
    for (std::size_t i = 0; i < minority_rows.size(); ++i) {
        std::size_t maj = 0;
        for (std::size_t j = 0; j < k; ++j) maj += labels[nn[i * k + j]] ? 0 : 1;
        out[i] = static_cast<double>(maj) / static_cast<double>(k);
    }
    return out;
}

ResampleResult smote(const FeatureMatrix& m, std::span<const std::uint8_t> labels, const ResampleConfig& cfg) {
    const auto s = split_classes(m, labels);
    require_neighbors(s.minority.size(), cfg.k_neighbors);
    const auto total = synthetic_count(s.minority.size(), s.majority.size(), cfg.target_ratio);
    if (total == 0) {
        auto r = passthrough(m, labels);
        r.warnings.push_back("smote: minority/majority ratio already at or above target; nothing generated");
        return r;
    }
    const auto alloc = uniform_allocation(s.minority.size(), total, mix_seed(cfg.rng_seed, 1));
    return generate(m, labels, s.minority, alloc, s.minority, cfg.k_neighbors, cfg.rng_seed);
}

ResampleResult adasyn(const FeatureMatrix& m, std::span<const std::uint8_t> labels, const ResampleConfig& cfg) {
    const auto s = split_classes(m, labels);
    require_neighbors(s.minority.size(), cfg.k_neighbors);
    const auto total = synthetic_count(s.minority.size(), s.majority.size(), cfg.target_ratio);
    if (total == 0) {
        auto r = passthrough(m, labels);
        r.warnings.push_back("adasyn: minority/majority ratio already at or above target; nothing generated");
        return r;
    }
    const auto weights = majority_fraction(m, labels, s.minority, cfg.k_neighbors);
    std::vector<std::string> warnings;
    std::vector<std::size_t> alloc;
    if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) {
        warnings.push_back("adasyn: every minority neighbourhood is purely minority; using uniform allocation");
        alloc = uniform_allocation(s.minority.size(), total, mix_seed(cfg.rng_seed, 1));
    } else {
        alloc = proportional_allocation(weights, total);
    }
    auto r = generate(m, labels, s.minority, alloc, s.minority, cfg.k_neighbors, cfg.rng_seed);
    r.warnings = std::move(warnings);
    return r;
}

ResampleResult borderline_smote(const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                                const ResampleConfig& cfg) {
    const auto s = split_classes(m, labels);
    require_neighbors(s.minority.size(), cfg.k_neighbors);
    const auto total = synthetic_count(s.minority.size(), s.majority.size(), cfg.target_ratio);
    if (total == 0) {
        auto r = passthrough(m, labels);
        r.warnings.push_back("borderline_smote: ratio already at or above target; nothing generated");
        return r;
    }
    const auto frac = majority_fraction(m, labels, s.minority, cfg.k_neighbors);
    std::vector<std::size_t> danger;
    for (std::size_t i = 0; i < s.minority.size(); ++i) {
        const auto maj = static_cast<std::size_t>(std::lround(frac[i] * static_cast<double>(cfg.k_neighbors)));
        if (classify_borderline(maj, cfg.k_neighbors) == BorderlineClass::Danger) danger.push_back(s.minority[i]);
    }
    if (danger.empty()) {
        auto r = passthrough(m, labels);
        r.warnings.push_back("borderline_smote: no danger samples; input returned unchanged");
        return r;
    }
    const auto alloc = uniform_allocation(danger.size(), total, mix_seed(cfg.rng_seed, 1));
    return generate(m, labels, danger, alloc, s.minority, cfg.k_neighbors, cfg.rng_seed);
}

ResampleResult resample(const FeatureMatrix& m, std::span<const std::uint8_t> labels, const ResampleConfig& cfg) {
    switch (cfg.method) {
        case ResampleMethod::None: return passthrough(m, labels);
        case ResampleMethod::Smote: return smote(m, labels, cfg);
        case ResampleMethod::Adasyn: return adasyn(m, labels, cfg);
        case ResampleMethod::BorderlineSmote: return borderline_smote(m, labels, cfg);
    }
    throw Error("resample: unknown method");
}

}  // namespace nids
