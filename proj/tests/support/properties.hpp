#pragma once

// Random-instance generators and property checks shared by the unit tests
// and the acceptance runner. Each check returns an empty string on success,
// otherwise a description of the first violation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "nids/detectors.hpp"
#include "nids/evaluation.hpp"
#include "nids/loss.hpp"
#include "nids/resample.hpp"
#include "nids/rng.hpp"
#include "oracles.hpp"

namespace nids::testing {

struct Scores {
    std::vector<double> p;
    std::vector<std::uint8_t> y;
};

// Scores on a coarse grid in [0,1] so ties are common; both classes present.
inline Scores random_scores(Rng& rng, std::size_t max_n = 60) {
    Scores s;
    const std::size_t n = 2 + rng.index(max_n);
    const double pos_rate = rng.uniform(0.05, 0.95);
    const int levels = 2 + static_cast<int>(rng.index(20));
    for (std::size_t i = 0; i < n; ++i) {
        s.y.push_back(rng.bernoulli(pos_rate));
        s.p.push_back(static_cast<double>(rng.index(levels + 1)) / levels);
    }
    s.y[0] = 1, s.y[1] = 0;
    return s;
}

// Counting metrics must equal the oracle exactly (F1 up to 1e-12, since it
// is computed from a different expression); AUC within 1e-9; the PR curve
// must hold one point per distinct score with counts recomputed exactly.
inline std::string metric_violation(const Scores& s, double threshold) {
    const auto d = apply_threshold(s.p, threshold);
    if (d != oracle::threshold(s.p, threshold)) return "apply_threshold differs";
    const auto cm = confusion(d, s.y);
    const auto c = oracle::count(d, s.y);
    if (cm.tp != c.tp || cm.fp != c.fp || cm.tn != c.tn || cm.fn != c.fn) return "confusion counts differ";
    if (precision(cm).value != oracle::precision(c)) return "precision differs";
    if (recall(cm).value != oracle::recall(c)) return "recall differs";
    if (accuracy(cm).value != oracle::accuracy(c)) return "accuracy differs";
    if (std::abs(f1(cm).value - oracle::f1(c)) > 1e-12) return "F1 differs";
    const double auc = roc_auc(s.p, s.y).auc, want = oracle::pairwise_auc(s.p, s.y);
    if (std::abs(auc - want) > 1e-9) return "AUC " + std::to_string(auc) + " vs pairwise " + std::to_string(want);
    const auto pr = pr_curve(s.p, s.y);
    const std::set<double> distinct(s.p.begin(), s.p.end());
    if (pr.size() != distinct.size()) return "PR curve point count differs";
    std::size_t i = 0;
    for (double t : distinct) {
        const auto ct = oracle::count(oracle::threshold(s.p, t), s.y);
        if (pr[i].threshold != t || pr[i].recall != oracle::recall(ct) || pr[i].precision != oracle::precision(ct))
            return "PR point at threshold " + std::to_string(t) + " differs";
        ++i;
    }
    return {};
}

// Scores strictly inside (0,1) on a 1/500 grid, positives shifted upward.
inline Scores random_threshold_instance(Rng& rng) {
    Scores s;
    const std::size_t n = 20 + rng.index(180);
    for (std::size_t i = 0; i < n; ++i) {
        s.y.push_back(rng.bernoulli(0.3));
        const long level = std::lround(rng.uniform() * 500 + (s.y.back() ? 100 : 0));
        s.p.push_back(static_cast<double>(std::clamp<long>(level, 1, 499)) / 500);
    }
    s.y[0] = 1, s.y[1] = 0;
    return s;
}

inline std::string threshold_violation(const Scores& s) {
    const double t = optimize_threshold(s.p, s.y);
    const double got = oracle::f1(oracle::count(oracle::threshold(s.p, t), s.y));
    const double best = oracle::grid_best_f1(s.p, s.y);
    if (std::abs(got - best) > 1e-12)
        return "F1 at chosen threshold " + std::to_string(got) + " vs grid best " + std::to_string(best);
    return {};
}

struct ResampleInstance {
    FeatureMatrix x;
    std::vector<std::uint8_t> y;
    std::size_t k = 1;
    std::vector<std::size_t> minority, all;
};

// Random small two-class problem; the minority keeps at least k+1 rows and
// stays smaller than the majority.
inline ResampleInstance random_resample_instance(Rng& rng) {
    ResampleInstance in;
    const std::size_t n = 20 + rng.index(41), cols = 2 + rng.index(3);
    in.k = 1 + rng.index(5);
    const std::size_t pos = in.k + 1 + rng.index(n / 2 - in.k - 1);
    in.x = FeatureMatrix(n, cols);
    in.y.assign(n, 0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < pos; ++i) in.y[order[i]] = 1;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < cols; ++c) in.x.at(r, c) = rng.normal() + (in.y[r] ? 1.0 : 0.0);
    for (std::size_t r = 0; r < n; ++r)
        if (in.y[r]) in.minority.push_back(r);
    in.all.resize(n);
    std::iota(in.all.begin(), in.all.end(), 0);
    return in;
}

inline std::size_t brute_majority(const ResampleInstance& in, std::size_t row) {
    std::size_t maj = 0;
    for (auto j : oracle::knn(in.x, row, in.all, in.k)) maj += in.y[j] ? 0 : 1;
    return maj;
}

// Originals unchanged and first, synthetic rows labeled 1, every synthetic
// row a convex combination of its seed and one of the seed's k nearest
// minority neighbours. ADASYN must allocate by brute-force majority density;
// BorderlineSMOTE may only seed danger points.
inline std::string resample_violation(const ResampleInstance& in, const ResampleResult& r, ResampleMethod method) {
    if (r.original_rows != in.x.rows || r.matrix.rows != in.x.rows + r.origins.size()) return "row bookkeeping";
    if (!std::equal(in.x.values.begin(), in.x.values.end(), r.matrix.values.begin())) return "original rows changed";
    if (!std::equal(in.y.begin(), in.y.end(), r.labels.begin())) return "original labels changed";
    for (std::size_t s = 0; s < r.origins.size(); ++s) {
        const auto& o = r.origins[s];
        if (r.labels[in.x.rows + s] != 1 || in.y[o.seed_row] != 1) return "synthetic row not minority";
        const auto nn = oracle::knn(in.x, o.seed_row, in.minority, in.k);
        if (std::find(nn.begin(), nn.end(), o.neighbor_row) == nn.end())
            return "partner is not among the seed's k nearest minority neighbours";
        const auto why =
            oracle::convex_violation(r.matrix.row(in.x.rows + s), in.x.row(o.seed_row), in.x.row(o.neighbor_row), o.lambda);
        if (!why.empty()) return "synthetic row " + std::to_string(s) + ": " + why;
    }
    const std::size_t total = synthetic_count(in.minority.size(), in.x.rows - in.minority.size(), 1.0);
    const auto used = oracle::seeds_used(r);
    const auto used_by = [&](std::size_t row) {
        const auto it = used.find(row);
        return it == used.end() ? std::size_t{0} : it->second;
    };
    if (method == ResampleMethod::Smote) {
        if (r.origins.size() != total) return "SMOTE generated the wrong count";
        std::size_t lo = SIZE_MAX, hi = 0;
        for (auto m : in.minority) lo = std::min(lo, used_by(m)), hi = std::max(hi, used_by(m));
        if (hi - lo > 1) return "SMOTE allocation is not uniform";
    }
    if (method == ResampleMethod::Adasyn) {
        std::vector<double> w;
        for (auto m : in.minority) w.push_back(double(brute_majority(in, m)) / double(in.k));
        if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) return {};
        const auto expected = oracle::largest_remainder(w, total);
        for (std::size_t i = 0; i < in.minority.size(); ++i)
            if (used_by(in.minority[i]) != expected[i])
                return "ADASYN allocation for row " + std::to_string(in.minority[i]) + " is " +
                       std::to_string(used_by(in.minority[i])) + ", density oracle says " + std::to_string(expected[i]);
    }
    if (method == ResampleMethod::BorderlineSmote) {
        for (const auto& [row, n] : used) {
            const auto maj = brute_majority(in, row);
            if (!(2 * maj >= in.k && maj < in.k)) return "seed row " + std::to_string(row) + " is not a danger point";
        }
    }
    return {};
}

// Focal loss with gamma=0, alpha=0.5 and no boosts is half the binary
// cross-entropy, in value and gradient. The reference is written out here.
inline std::string focal_degeneracy_violation(double p, std::uint8_t y, double tol = 1e-9) {
    const auto fp = FocalLossParams::half_cross_entropy();
    const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double bce = y ? -std::log(q) : -std::log(1.0 - q);
    const double bce_grad = y ? -1.0 / q : 1.0 / (1.0 - q);
    const double l = focal_loss(p, y, fp), g = focal_loss_grad(p, y, fp);
    if (std::abs(l - 0.5 * bce) > tol * std::max(1.0, bce))
        return "loss " + std::to_string(l) + " vs " + std::to_string(0.5 * bce);
    if (std::abs(g - 0.5 * bce_grad) > tol * std::max(1.0, std::abs(bce_grad)))
        return "gradient " + std::to_string(g) + " vs " + std::to_string(0.5 * bce_grad);
    return {};
}

}  // namespace nids::testing
