#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "nids/classical.hpp"
#include "nids/rng.hpp"

using namespace nids;

namespace {

struct Data {
    FeatureMatrix x;
    std::vector<std::uint8_t> y;
};

Data toy_data(std::size_t n, std::size_t f, double pos_rate, std::uint64_t seed) {
    Rng rng(seed);
    Data d{FeatureMatrix(n, f), {}};
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t y = rng.bernoulli(pos_rate);
        for (std::size_t c = 0; c < f; ++c) d.x.at(i, c) = rng.normal() + (y ? 0.8 * (c % 2 ? 1 : -1) : 0.0);
        d.y.push_back(y);
    }
    d.y[0] = 0, d.y[1] = 1;
    return d;
}

Data permuted(const Data& d, std::uint64_t seed) {
    std::vector<std::size_t> p(d.x.rows);
    std::iota(p.begin(), p.end(), 0);
    Rng rng(seed);
    rng.shuffle(p);
    Data out{d.x.select_rows(p), {}};
    for (auto i : p) out.y.push_back(d.y[i]);
    return out;
}

double log_loss(const std::vector<double>& p, const std::vector<std::uint8_t>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s -= y[i] ? std::log(p[i]) : std::log(1 - p[i]);
    return s / static_cast<double>(p.size());
}

// Independent traversal: walk the node array by hand.
double traverse(const DecisionTree& t, std::span<const double> row) {
    const TreeNode* n = &t.nodes[0];
    while (n->feature != -1) n = &t.nodes[row[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right];
    return n->value;
}

}  // namespace

TEST_CASE("forest on a single-feature separable set") {
    Data d{FeatureMatrix(40, 1), {}};
    for (std::size_t i = 0; i < 40; ++i) {
        d.x.at(i, 0) = (i < 20 ? -1.0 : 1.0) * (1.0 + static_cast<double>(i % 20));
        d.y.push_back(i >= 20);
    }
    ForestConfig cfg;
    cfg.n_trees = 25;
    cfg.rng_seed = 4;
    const auto f = train_random_forest(d.x, d.y, cfg);
    for (const auto& t : f.trees) {
        REQUIRE(t.nodes[0].feature == 0);
        CHECK(t.nodes[0].threshold > -20.0);
        CHECK(t.nodes[0].threshold < 20.0);
    }
    const auto p = f.predict_proba(d.x);
    for (std::size_t i = 0; i < 40; ++i) CHECK((p[i] >= 0.5) == (d.y[i] == 1));

    cfg.bootstrap = false;
    cfg.n_trees = 3;
    for (const auto& t : train_random_forest(d.x, d.y, cfg).trees) CHECK(t.nodes[0].threshold == 0.0);
}

TEST_CASE("weighted gini root split matches exhaustive enumeration") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(seed + 100);
        const std::size_t n = 10 + rng.index(41), F = 1 + rng.index(4);
        auto d = toy_data(n, F, 0.2, seed);
        for (auto& v : d.x.values) v = std::round(v * 4) / 4;  // force ties
        ForestConfig cfg;
        cfg.n_trees = 1;
        cfg.max_depth = 1;
        cfg.bootstrap = false;
        cfg.max_features = F;
        cfg.class_weight = {1.0, 5.0};
        const auto f = train_random_forest(d.x, d.y, cfg);

        double w0 = 0, w1 = 0;
        for (auto y : d.y) (y ? w1 : w0) += cfg.class_weight[y];
        const double parent = (w0 + w1) * weighted_gini(w0, w1);
        double best = 0.0;
        for (std::size_t c = 0; c < F; ++c)
            for (std::size_t i = 0; i < n; ++i) {
                const double t = d.x.at(i, c);
                double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double w = cfg.class_weight[d.y[j]];
                    if (d.x.at(j, c) <= t) (d.y[j] ? l1 : l0) += w;
                    else (d.y[j] ? r1 : r0) += w;
                }
                if (r0 + r1 == 0) continue;
                best = std::max(best, parent - (l0 + l1) * weighted_gini(l0, l1) - (r0 + r1) * weighted_gini(r0, r1));
            }
        const auto& root = f.trees[0].nodes[0];
        if (best <= 1e-9) {
            CHECK(root.feature == -1);
            continue;
        }
        REQUIRE(root.feature >= 0);
        double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double w = cfg.class_weight[d.y[j]];
            if (d.x.at(j, static_cast<std::size_t>(root.feature)) <= root.threshold) (d.y[j] ? l1 : l0) += w;
            else (d.y[j] ? r1 : r0) += w;
        }
        const double got = parent - (l0 + l1) * weighted_gini(l0, l1) - (r0 + r1) * weighted_gini(r0, r1);
        CHECK(got == doctest::Approx(best).epsilon(1e-12));
        CHECK(f.trees[0].nodes[root.left].value == doctest::Approx(l1 / (l0 + l1)));
    }
}

TEST_CASE("forest is reproducible, row-order invariant and depth bounded") {
    const auto d = toy_data(150, 6, 0.3, 9);
    ForestConfig cfg;
    cfg.n_trees = 30;
    cfg.max_depth = 4;
    cfg.class_weight = {1.0, 5.0};
    cfg.rng_seed = 123;
    const auto a = train_random_forest(d.x, d.y, cfg);
    const auto b = train_random_forest(d.x, d.y, cfg);
    const auto p = permuted(d, 5);
    const auto c = train_random_forest(p.x, p.y, cfg);
    ByteWriter wa, wb, wc;
    write_forest(wa, a);
    write_forest(wb, b);
    write_forest(wc, c);
    CHECK(wa.bytes() == wb.bytes());
    CHECK(wa.bytes() == wc.bytes());
    for (const auto& t : a.trees) CHECK(t.depth() <= 4);
}

TEST_CASE("forest probability is the exact mean over trees") {
    const auto d = toy_data(60, 4, 0.4, 2);
    ForestConfig cfg;
    cfg.n_trees = 17;
    cfg.rng_seed = 8;
    const auto f = train_random_forest(d.x, d.y, cfg);
    const auto p = f.predict_proba(d.x);
    for (std::size_t i = 0; i < 10; ++i) {
        double s = 0.0;
        for (const auto& t : f.trees) s += traverse(t, d.x.row(i));
        CHECK(p[i] == s / 17.0);
        CHECK(p[i] >= 0.0);
        CHECK(p[i] <= 1.0);
    }
}

TEST_CASE("forest averaging of pure leaves") {
    RandomForest f;
    f.n_features = 1;
    for (int t = 0; t < 200; ++t) f.trees.push_back(DecisionTree{{TreeNode{-1, 0, 0, 0, t < 150 ? 1.0 : 0.0}}});
    FeatureMatrix m(1, 1);
    CHECK(f.predict_proba(m)[0] == 0.75);
    for (auto& t : f.trees) t.nodes[0].value = 1.0;
    CHECK(f.predict_proba(m)[0] == 1.0);
    CHECK_THROWS_AS(f.predict_proba(FeatureMatrix(1, 2)), ShapeError);
}

TEST_CASE("single-class input is rejected") {
    FeatureMatrix x(5, 2);
    std::vector<std::uint8_t> y(5, 1);
    CHECK_THROWS_WITH(train_random_forest(x, y, {}), doctest::Contains("single class"));
    CHECK_THROWS_WITH(train_gradient_boosting(x, y, {}), doctest::Contains("single class"));
}

TEST_CASE("boosting with zero stages predicts the base rate") {
    const auto d = toy_data(80, 3, 0.25, 3);
    BoostConfig cfg;
    cfg.n_estimators = 5;
    const auto g = train_gradient_boosting(d.x, d.y, cfg);
    const double pos = std::accumulate(d.y.begin(), d.y.end(), 0.0);
    const double base = std::log(pos / (80.0 - pos));
    for (double z : g.decision_function(d.x, 0)) CHECK(z == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("boosting training log-loss is non-increasing in stages") {
    const auto d = toy_data(200, 5, 0.3, 11);
    BoostConfig cfg;
    cfg.n_estimators = 30;
    cfg.max_depth = 3;
    const auto g = train_gradient_boosting(d.x, d.y, cfg);
    double prev = INFINITY;
    for (std::size_t s = 0; s <= 30; ++s) {
        const double l = log_loss(g.predict_proba(d.x, s), d.y);
        CHECK(l <= prev + 1e-12);
        prev = l;
    }
    SUBCASE("one depth-1 stage strictly decreases the loss on a separable set") {
        Data sep{FeatureMatrix(20, 1), {}};
        for (std::size_t i = 0; i < 20; ++i) sep.x.at(i, 0) = static_cast<double>(i), sep.y.push_back(i >= 12);
        BoostConfig one;
        one.n_estimators = 1;
        one.max_depth = 1;
        const auto g1 = train_gradient_boosting(sep.x, sep.y, one);
        CHECK(log_loss(g1.predict_proba(sep.x, 1), sep.y) < log_loss(g1.predict_proba(sep.x, 0), sep.y));
    }
}

namespace {

// Brute-force stagewise boosting: trees built by direct SSE evaluation of
// every (feature, threshold) candidate.
struct OracleNode {
    int feature = -1;
    double threshold = 0, value = 0;
    std::unique_ptr<OracleNode> left, right;
    double eval(std::span<const double> row) const {
        if (feature < 0) return value;
        return row[static_cast<std::size_t>(feature)] <= threshold ? left->eval(row) : right->eval(row);
    }
};

std::unique_ptr<OracleNode> oracle_tree(const FeatureMatrix& x, const std::vector<double>& r,
                                        const std::vector<double>& h, std::vector<std::size_t> rows,
                                        std::size_t depth) {
    auto node = std::make_unique<OracleNode>();
    double sr = 0, sh = 0;
    for (auto i : rows) sr += r[i], sh += h[i];
    node->value = sr / std::max(sh, 1e-12);
    if (depth == 0 || rows.size() < 2) return node;
    const auto sse = [&](const std::vector<std::size_t>& idx) {
        double m = 0;
        for (auto i : idx) m += r[i];
        m /= static_cast<double>(idx.size());
        double s = 0;
        for (auto i : idx) s += (r[i] - m) * (r[i] - m);
        return s;
    };
    const double base = sse(rows);
    double best = base;
    int bf = -1;
    double bt = 0;
    for (std::size_t c = 0; c < x.cols; ++c) {
        std::vector<double> vals;
        for (auto i : rows) vals.push_back(x.at(i, c));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            const double t = vals[k] + (vals[k + 1] - vals[k]) / 2;
            std::vector<std::size_t> L, R;
            for (auto i : rows) (x.at(i, c) <= t ? L : R).push_back(i);
            const double s = sse(L) + sse(R);
            if (s < best - 1e-9 * std::max(1.0, base)) best = s, bf = static_cast<int>(c), bt = t;
        }
    }
    if (bf < 0) return node;
    std::vector<std::size_t> L, R;
    for (auto i : rows) (x.at(i, static_cast<std::size_t>(bf)) <= bt ? L : R).push_back(i);
    node->feature = bf;
    node->threshold = bt;
    node->left = oracle_tree(x, r, h, L, depth - 1);
    node->right = oracle_tree(x, r, h, R, depth - 1);
    return node;
}

}  // namespace

TEST_CASE("staged boosting matches a brute-force re-fit") {
    const auto d = toy_data(20, 3, 0.4, 17);
    BoostConfig cfg;
    cfg.n_estimators = 6;
    cfg.max_depth = 2;
    cfg.learning_rate = 0.3;
    const auto g = train_gradient_boosting(d.x, d.y, cfg);

    const double pos = std::accumulate(d.y.begin(), d.y.end(), 0.0);
    std::vector<double> score(20, std::log(pos / (20 - pos))), r(20), h(20);
    std::vector<std::size_t> all(20);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t s = 1; s <= cfg.n_estimators; ++s) {
        for (std::size_t i = 0; i < 20; ++i) {
            const double p = 1 / (1 + std::exp(-score[i]));
            r[i] = d.y[i] - p;
            h[i] = p * (1 - p);
        }
        const auto tree = oracle_tree(d.x, r, h, all, cfg.max_depth);
        for (std::size_t i = 0; i < 20; ++i) score[i] += cfg.learning_rate * tree->eval(d.x.row(i));
        const auto staged = g.decision_function(d.x, s);
        for (std::size_t i = 0; i < 20; ++i) CHECK(staged[i] == doctest::Approx(score[i]).epsilon(1e-9));
    }
}

TEST_CASE("boosting is row-order invariant") {
    const auto d = toy_data(90, 4, 0.3, 21);
    BoostConfig cfg;
    cfg.n_estimators = 8;
    const auto a = train_gradient_boosting(d.x, d.y, cfg);
    const auto p = permuted(d, 3);
    const auto b = train_gradient_boosting(p.x, p.y, cfg);
    ByteWriter wa, wb;
    write_boosting(wa, a);
    write_boosting(wb, b);
    CHECK(wa.bytes() == wb.bytes());
}

TEST_CASE("logistic regression on mirrored data puts the boundary through the origin") {
    auto half = toy_data(50, 3, 0.5, 4);
    Data d{FeatureMatrix(100, 3), {}};
    for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            d.x.at(i, c) = half.x.at(i, c);
            d.x.at(50 + i, c) = -half.x.at(i, c);
        }
    }
    for (std::size_t i = 0; i < 50; ++i) d.y.push_back(half.y[i]);
    for (std::size_t i = 0; i < 50; ++i) d.y.push_back(1 - half.y[i]);
    LogisticConfig cfg;
    cfg.class_weight = {1, 1};
    const auto m = train_logistic_regression(d.x, d.y, cfg);
    CHECK(m.converged);
    CHECK(std::abs(m.intercept) < 1e-8);
    cfg.fit_intercept = false;
    const auto m0 = train_logistic_regression(d.x, d.y, cfg);
    const auto p = m0.predict_proba(d.x);
    for (std::size_t i = 0; i < 50; ++i) CHECK(p[i] + p[50 + i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("positive class weight raises the predicted positive rate") {
    const auto d = toy_data(300, 4, 0.5, 6);
    LogisticConfig even;
    even.class_weight = {1, 1};
    LogisticConfig skew;  // defaults to {1, 4}
    const auto a = train_logistic_regression(d.x, d.y, even).predict_proba(d.x);
    const auto b = train_logistic_regression(d.x, d.y, skew).predict_proba(d.x);
    std::size_t pa = 0, pb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) pa += a[i] >= 0.5, pb += b[i] >= 0.5;
    CHECK(pb > pa);
}

TEST_CASE("logistic optimum has a small gradient, checked independently") {
    const auto d = toy_data(200, 5, 0.3, 13);
    LogisticConfig cfg;
    const auto m = train_logistic_regression(d.x, d.y, cfg);
    REQUIRE(m.converged);
    std::vector<double> g(6, 0.0);
    for (std::size_t i = 0; i < d.x.rows; ++i) {
        double z = m.intercept;
        for (std::size_t c = 0; c < 5; ++c) z += m.weights[c] * d.x.at(i, c);
        const double resid = cfg.class_weight[d.y[i]] * (1 / (1 + std::exp(-z)) - d.y[i]);
        for (std::size_t c = 0; c < 5; ++c) g[c] += resid * d.x.at(i, c);
        g[5] += resid;
    }
    for (std::size_t c = 0; c < 5; ++c) g[c] += cfg.l2 * m.weights[c];
    double norm = 0;
    for (double v : g) norm += v * v;
    CHECK(std::sqrt(norm) < cfg.tolerance * 10);
    CHECK(m.gradient_norm < cfg.tolerance);
}

TEST_CASE("model serialization round-trips") {
    const auto d = toy_data(70, 3, 0.3, 30);
    ForestConfig fc;
    fc.n_trees = 5;
    const auto f = train_random_forest(d.x, d.y, fc);
    BoostConfig bc;
    bc.n_estimators = 4;
    const auto g = train_gradient_boosting(d.x, d.y, bc);
    const auto l = train_logistic_regression(d.x, d.y, {});
    ByteWriter w;
    write_forest(w, f);
    write_boosting(w, g);
    write_logistic(w, l);
    const std::string bytes = w.take();
    ByteReader r(bytes);
    const auto f2 = read_forest(r);
    const auto g2 = read_boosting(r);
    const auto l2 = read_logistic(r);
    CHECK(r.done());
    CHECK(f2.predict_proba(d.x) == f.predict_proba(d.x));
    CHECK(g2.predict_proba(d.x) == g.predict_proba(d.x));
    CHECK(l2.predict_proba(d.x) == l.predict_proba(d.x));
    ByteReader truncated(std::string_view(bytes).substr(0, bytes.size() / 2));
    CHECK_THROWS_AS((read_forest(truncated), read_boosting(truncated)), FormatError);
}
