#include "nids/classical.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "nids/kernels.hpp"
#include "nids/rng.hpp"

namespace nids {

using Index = std::ptrdiff_t;

double DecisionTree::predict(std::span<const double> row) const { return nodes[leaf_index(row)].value; }

std::size_t DecisionTree::leaf_index(std::span<const double> row) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return i;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (nodes[i].feature >= 0) d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
    }
    return deepest;
}

void ForestConfig::validate() const {
    if (n_trees < 1) throw Error("forest config: n_trees must be >= 1");
    if (max_depth < 1) throw Error("forest config: max_depth must be >= 1");
    if (!(class_weight[0] > 0 && class_weight[1] > 0)) throw Error("forest config: class weights must be positive");
    if (min_samples_split < 2) throw Error("forest config: min_samples_split must be >= 2");
}

void BoostConfig::validate() const {
    if (n_estimators < 1) throw Error("boost config: n_estimators must be >= 1");
    if (max_depth < 1) throw Error("boost config: max_depth must be >= 1");
    if (!(learning_rate > 0)) throw Error("boost config: learning_rate must be positive");
    if (min_samples_split < 2) throw Error("boost config: min_samples_split must be >= 2");
}

void LogisticConfig::validate() const {
    if (max_iterations < 1) throw Error("logistic config: max_iterations must be >= 1");
    if (!(class_weight[0] > 0 && class_weight[1] > 0)) throw Error("logistic config: class weights must be positive");
    if (!(l2 >= 0)) throw Error("logistic config: l2 must be >= 0");
    if (!(tolerance > 0)) throw Error("logistic config: tolerance must be positive");
}

double weighted_gini(double w0, double w1) {
    const double w = w0 + w1;
    if (w <= 0) return 0.0;
    const double p0 = w0 / w, p1 = w1 / w;
    return 1.0 - p0 * p0 - p1 * p1;
}

std::vector<std::size_t> canonical_row_order(const FeatureMatrix& m, std::span<const std::uint8_t> labels) {
    std::vector<std::size_t> order(m.rows);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ra = m.row(a), rb = m.row(b);
        for (std::size_t c = 0; c < m.cols; ++c)
            if (ra[c] != rb[c]) return ra[c] < rb[c];
        return labels[a] < labels[b];
    });
    return order;
}

namespace {

enum class Criterion { Gini, SquaredError };

// Each sample carries two statistics (a, b). Gini: a = weight of class 0,
// b = weight of class 1. Squared error: a = count, b = residual sum. A split
// minimizing child impurity maximizes the sum of proxy(a, b) over children.
double proxy(Criterion c, double a, double b) {
    if (c == Criterion::Gini) {
        const double w = a + b;
        return w > 0 ? (a * a + b * b) / w : 0.0;
    }
    return a > 0 ? b * b / a : 0.0;
}

struct GrowParams {
    Criterion criterion;
    std::size_t max_depth;
    std::size_t min_samples_split;
    std::size_t features_per_split;
};

class TreeGrower {
public:
    TreeGrower(const FeatureMatrix& m, std::span<const double> a, std::span<const double> b, GrowParams p,
               std::function<double(std::span<const std::size_t>)> leaf_value, Rng* rng)
        : m_(m), a_(a), b_(b), p_(p), leaf_value_(std::move(leaf_value)), rng_(rng) {
        features_.resize(m.cols);
        std::iota(features_.begin(), features_.end(), 0);
    }

    DecisionTree grow(std::vector<std::size_t> rows) {
        DecisionTree t;
        nodes_ = &t.nodes;
        build(rows, 0);
        return t;
    }

private:
    struct Best {
        double gain = 0.0;
        std::size_t feature = 0;
        double threshold = 0.0;
        bool found = false;
    };

    std::uint32_t build(std::vector<std::size_t>& rows, std::size_t depth) {
        const auto id = static_cast<std::uint32_t>(nodes_->size());
        nodes_->push_back(TreeNode{-1, 0.0, 0, 0, leaf_value_(rows)});
        double ta = 0, tb = 0;
        for (auto r : rows) ta += a_[r], tb += b_[r];
        if (depth >= p_.max_depth || rows.size() < p_.min_samples_split) return id;
        if (p_.criterion == Criterion::Gini && (ta <= 0 || tb <= 0)) return id;

        const Best best = find_split(rows, ta, tb);
        if (!best.found) return id;
        std::vector<std::size_t> left, right;
        for (auto r : rows) (m_.at(r, best.feature) <= best.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const auto l = build(left, depth + 1);
        const auto rr = build(right, depth + 1);
        auto& n = (*nodes_)[id];
        n.feature = static_cast<std::int32_t>(best.feature);
        n.threshold = best.threshold;
        n.left = l;
        n.right = rr;
        return id;
    }

    Best find_split(const std::vector<std::size_t>& rows, double ta, double tb) {
        const std::size_t F = m_.cols;
        std::size_t take = std::min(p_.features_per_split, F);
        if (take < F) {
            for (std::size_t i = 0; i < take; ++i) std::swap(features_[i], features_[i + rng_->index(F - i)]);
        }
        const double parent = proxy(p_.criterion, ta, tb);
        const double min_gain = 1e-12 * std::max(1.0, std::abs(parent));
        Best best;
        std::vector<std::pair<double, std::size_t>> vals(rows.size());
        for (std::size_t fi = 0; fi < take; ++fi) {
            const std::size_t f = take < F ? features_[fi] : fi;
            for (std::size_t i = 0; i < rows.size(); ++i) vals[i] = {m_.at(rows[i], f), rows[i]};
            std::sort(vals.begin(), vals.end());
            double la = 0, lb = 0;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                la += a_[vals[i].second];
                lb += b_[vals[i].second];
                if (vals[i].first == vals[i + 1].first) continue;
                const double gain =
                    proxy(p_.criterion, la, lb) + proxy(p_.criterion, ta - la, tb - lb) - parent;
                if (gain > min_gain && (!best.found || gain > best.gain)) {
                    const double lo = vals[i].first, hi = vals[i + 1].first;
                    double t = lo + (hi - lo) / 2;
                    if (!(t < hi)) t = lo;
                    best = {gain, f, t, true};
                }
            }
        }
        return best;
    }

    const FeatureMatrix& m_;
    std::span<const double> a_, b_;
    GrowParams p_;
    std::function<double(std::span<const std::size_t>)> leaf_value_;
    Rng* rng_;
    std::vector<std::size_t> features_;
    std::vector<TreeNode>* nodes_ = nullptr;
};

void require_binary(const FeatureMatrix& m, std::span<const std::uint8_t> labels, const char* who, bool both) {
    if (labels.size() != m.rows) throw ShapeError(std::string(who) + ": label count does not match rows");
    if (m.rows == 0) throw Error(std::string(who) + ": empty training set");
    std::size_t pos = 0;
    for (auto y : labels) {
        if (y > 1) throw Error(std::string(who) + ": labels must be 0 or 1");
        pos += y;
    }
    if (both && (pos == 0 || pos == labels.size()))
        throw Error(std::string(who) + ": training labels contain a single class");
}

struct Canonical {
    FeatureMatrix m;
    std::vector<std::uint8_t> y;
};

Canonical canonicalize(const FeatureMatrix& m, std::span<const std::uint8_t> labels) {
    const auto order = canonical_row_order(m, labels);
    Canonical c{m.select_rows(order), {}};
    c.y.reserve(order.size());
    for (auto i : order) c.y.push_back(labels[i]);
    return c;
}

void check_width(std::size_t expected, const FeatureMatrix& m, const char* who) {
    if (m.cols != expected)
        throw ShapeError(std::string(who) + ": matrix has " + std::to_string(m.cols) + " columns, model expects " +
                         std::to_string(expected));
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

double RandomForest::predict_row(std::span<const double> row) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(row);
    return s / static_cast<double>(trees.size());
}

std::vector<double> RandomForest::predict_proba(const FeatureMatrix& m) const {
    check_width(n_features, m, "random forest");
    std::vector<double> out(m.rows);
#pragma omp parallel for schedule(static) if (m.rows * trees.size() > 20000)
    for (Index i = 0; i < static_cast<Index>(m.rows); ++i) out[i] = predict_row(m.row(i));
    return out;
}

RandomForest train_random_forest(const FeatureMatrix& input, std::span<const std::uint8_t> labels,
                                 const ForestConfig& cfg) {
    cfg.validate();
    require_binary(input, labels, "random forest", true);
    const auto data = canonicalize(input, labels);
    const auto& m = data.m;
    const std::size_t n = m.rows;
    const std::size_t mtry =
        cfg.max_features ? cfg.max_features
                         : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(double(m.cols)))));

    RandomForest forest;
    forest.n_features = m.cols;
    forest.trees.resize(cfg.n_trees);
#pragma omp parallel for schedule(dynamic, 1)
    for (Index t = 0; t < static_cast<Index>(cfg.n_trees); ++t) {
        Rng rng(mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(t)));
        std::vector<double> mult(n, 1.0);
        if (cfg.bootstrap) {
            std::fill(mult.begin(), mult.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) mult[rng.index(n)] += 1.0;
        }
        std::vector<double> a(n), b(n);
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = mult[i] * cfg.class_weight[data.y[i]];
            (data.y[i] ? b : a)[i] = w;
            if (mult[i] > 0) rows.push_back(i);
        }
        const auto leaf = [&](std::span<const std::size_t> idx) {
            double w0 = 0, w1 = 0;
            for (auto r : idx) w0 += a[r], w1 += b[r];
            return w0 + w1 > 0 ? w1 / (w0 + w1) : 0.0;
        };
        TreeGrower grower(m, a, b, {Criterion::Gini, cfg.max_depth, cfg.min_samples_split, mtry}, leaf, &rng);
        forest.trees[t] = grower.grow(std::move(rows));
    }
    return forest;
}

std::vector<double> GradientBoosting::decision_function(const FeatureMatrix& m, std::size_t stages) const {
    check_width(n_features, m, "gradient boosting");
    const std::size_t use = std::min(stages, trees.size());
    std::vector<double> out(m.rows);
#pragma omp parallel for schedule(static) if (m.rows * use > 20000)
    for (Index i = 0; i < static_cast<Index>(m.rows); ++i) {
        double s = 0.0;
        for (std::size_t t = 0; t < use; ++t) s += trees[t].predict(m.row(i));
        out[i] = init_score + learning_rate * s;
    }
    return out;
}

std::vector<double> GradientBoosting::predict_proba(const FeatureMatrix& m, std::size_t stages) const {
    auto z = decision_function(m, stages);
    for (auto& v : z) v = sigmoid(v);
    return z;
}

GradientBoosting train_gradient_boosting(const FeatureMatrix& input, std::span<const std::uint8_t> labels,
                                         const BoostConfig& cfg) {
    cfg.validate();
    require_binary(input, labels, "gradient boosting", true);
    const auto data = canonicalize(input, labels);
    const auto& m = data.m;
    const std::size_t n = m.rows;

    GradientBoosting g;
    g.n_features = m.cols;
    g.learning_rate = cfg.learning_rate;
    const double pos = std::accumulate(data.y.begin(), data.y.end(), 0.0);
    g.init_score = std::log(pos / (static_cast<double>(n) - pos));

    std::vector<double> score(n, g.init_score), ones(n, 1.0), resid(n), hess(n);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    Rng rng(mix_seed(cfg.rng_seed, 0xb005));
    const auto leaf = [&](std::span<const std::size_t> idx) {
        double r = 0, h = 0;
        for (auto i : idx) r += resid[i], h += hess[i];
        return r / std::max(h, 1e-12);
    };
    for (std::size_t stage = 0; stage < cfg.n_estimators; ++stage) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(score[i]);
            resid[i] = data.y[i] - p;
            hess[i] = p * (1.0 - p);
        }
        TreeGrower grower(m, ones, resid, {Criterion::SquaredError, cfg.max_depth, cfg.min_samples_split, m.cols},
                          leaf, &rng);
        g.trees.push_back(grower.grow(all));
        const auto& tree = g.trees.back();
        for (std::size_t i = 0; i < n; ++i) score[i] += cfg.learning_rate * tree.predict(m.row(i));
    }
    return g;
}

std::vector<double> LogisticModel::decision_function(const FeatureMatrix& m) const {
    check_width(weights.size(), m, "logistic regression");
    std::vector<double> z(m.rows);
    kernels::gemm(m.rows, 1, m.cols, m.values.data(), weights.data(), z.data(), false);
    for (auto& v : z) v += intercept;
    return z;
}

std::vector<double> LogisticModel::predict_proba(const FeatureMatrix& m) const {
    auto z = decision_function(m);
    for (auto& v : z) v = sigmoid(v);
    return z;
}

double logistic_objective(const LogisticModel& model, const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                          const LogisticConfig& cfg, std::vector<double>* gradient) {
    const auto z = model.decision_function(m);
    double obj = 0.0;
    std::vector<double> resid(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double s = cfg.class_weight[labels[i]];
        obj += s * (softplus(z[i]) - labels[i] * z[i]);
        resid[i] = s * (sigmoid(z[i]) - labels[i]);
    }
    double reg = 0.0;
    for (double w : model.weights) reg += w * w;
    obj += 0.5 * cfg.l2 * reg;
    if (gradient) {
        gradient->assign(m.cols + 1, 0.0);
        kernels::gemm_tn(m.cols, 1, m.rows, m.values.data(), resid.data(), gradient->data(), false);
        for (std::size_t j = 0; j < m.cols; ++j) (*gradient)[j] += cfg.l2 * model.weights[j];
        (*gradient)[m.cols] = cfg.fit_intercept ? std::accumulate(resid.begin(), resid.end(), 0.0) : 0.0;
    }
    return obj;
}

namespace {

// Solves H x = g in place for symmetric positive definite H (row-major, n x n).
bool cholesky_solve(std::vector<double> h, std::size_t n, std::vector<double>& g) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = h[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= h[j * n + k] * h[j * n + k];
        if (!(d > 0)) return false;
        d = std::sqrt(d);
        h[j * n + j] = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = h[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= h[i * n + k] * h[j * n + k];
            h[i * n + j] = s / d;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = g[i];
        for (std::size_t k = 0; k < i; ++k) s -= h[i * n + k] * g[k];
        g[i] = s / h[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = g[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= h[k * n + i] * g[k];
        g[i] = s / h[i * n + i];
    }
    return true;
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

LogisticModel train_logistic_regression(const FeatureMatrix& input, std::span<const std::uint8_t> labels,
                                        const LogisticConfig& cfg) {
    cfg.validate();
    require_binary(input, labels, "logistic regression", false);
    const auto data = canonicalize(input, labels);
    const auto& m = data.m;
    const std::size_t n = m.rows, F = m.cols, P = F + 1;

    LogisticModel model;
    model.weights.assign(F, 0.0);
    std::vector<double> grad, scaled(n * P), hess(P * P);
    double obj = logistic_objective(model, m, data.y, cfg, &grad);
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        model.gradient_norm = norm(grad);
        if (model.gradient_norm < cfg.tolerance) {
            model.converged = true;
            break;
        }
        const auto z = model.decision_function(m);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(z[i]);
            const double r = std::sqrt(cfg.class_weight[data.y[i]] * p * (1.0 - p));
            for (std::size_t j = 0; j < F; ++j) scaled[i * P + j] = m.at(i, j) * r;
            scaled[i * P + F] = cfg.fit_intercept ? r : 0.0;
        }
        kernels::gemm_tn(P, P, n, scaled.data(), scaled.data(), hess.data(), false);
        for (std::size_t j = 0; j < F; ++j) hess[j * P + j] += cfg.l2;
        hess[F * P + F] += cfg.fit_intercept ? 1e-10 : 1.0;
        // Tiny ridge keeps the system solvable when the data leave a direction flat.
        for (std::size_t j = 0; j < P; ++j) hess[j * P + j] += 1e-12 * (1.0 + hess[j * P + j]);

        std::vector<double> step = grad;
        if (!cholesky_solve(hess, P, step)) step = grad;
        double t = 1.0;
        LogisticModel trial = model;
        double trial_obj = obj;
        const double slope = std::inner_product(grad.begin(), grad.end(), step.begin(), 0.0);
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            for (std::size_t j = 0; j < F; ++j) trial.weights[j] = model.weights[j] - t * step[j];
            trial.intercept = cfg.fit_intercept ? model.intercept - t * step[F] : 0.0;
            trial_obj = logistic_objective(trial, m, data.y, cfg);
            if (trial_obj <= obj - 1e-4 * t * slope) break;
        }
        model.weights = trial.weights;
        model.intercept = trial.intercept;
        model.iterations = it + 1;
        const double prev = obj;
        obj = logistic_objective(model, m, data.y, cfg, &grad);
        if (!(obj < prev) && norm(grad) >= cfg.tolerance) {
            // No further decrease is representable in double precision.
            model.gradient_norm = norm(grad);
            break;
        }
    }
    model.gradient_norm = norm(grad);
    model.converged = model.gradient_norm < cfg.tolerance;
    return model;
}

void write_tree(ByteWriter& w, const DecisionTree& t) {
    w.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
        w.u32(static_cast<std::uint32_t>(n.feature));
        w.f64(n.threshold);
        w.u32(n.left);
        w.u32(n.right);
        w.f64(n.value);
    }
}

DecisionTree read_tree(ByteReader& r) {
    DecisionTree t;
    const auto count = r.length(28);
    t.nodes.resize(count);
    for (auto& n : t.nodes) {
        n.feature = static_cast<std::int32_t>(r.u32());
        n.threshold = r.f64();
        n.left = r.u32();
        n.right = r.u32();
        n.value = r.f64();
    }
    for (std::size_t i = 0; i < count; ++i) {
        const auto& n = t.nodes[i];
        if (n.feature >= 0 && (n.left <= i || n.right <= i || n.left >= count || n.right >= count))
            throw FormatError("tree: child index out of range");
    }
    if (count == 0) throw FormatError("tree: no nodes");
    return t;
}

void write_forest(ByteWriter& w, const RandomForest& f) {
    w.u64(f.n_features);
    w.u64(f.trees.size());
    for (const auto& t : f.trees) write_tree(w, t);
}

RandomForest read_forest(ByteReader& r) {
    RandomForest f;
    f.n_features = r.u64();
    f.trees.resize(r.length(8));
    for (auto& t : f.trees) t = read_tree(r);
    if (f.trees.empty()) throw FormatError("forest: no trees");
    return f;
}

void write_boosting(ByteWriter& w, const GradientBoosting& g) {
    w.u64(g.n_features);
    w.f64(g.init_score);
    w.f64(g.learning_rate);
    w.u64(g.trees.size());
    for (const auto& t : g.trees) write_tree(w, t);
}

GradientBoosting read_boosting(ByteReader& r) {
    GradientBoosting g;
    g.n_features = r.u64();
    g.init_score = r.f64();
    g.learning_rate = r.f64();
    g.trees.resize(r.length(8));
    for (auto& t : g.trees) t = read_tree(r);
    return g;
}

void write_logistic(ByteWriter& w, const LogisticModel& m) {
    w.f64s(m.weights);
    w.f64(m.intercept);
    w.u8(m.converged ? 1 : 0);
    w.u64(m.iterations);
    w.f64(m.gradient_norm);
}

LogisticModel read_logistic(ByteReader& r) {
    LogisticModel m;
    m.weights = r.f64s();
    m.intercept = r.f64();
    m.converged = r.u8() != 0;
    m.iterations = r.u64();
    m.gradient_norm = r.f64();
    return m;
}

}  // namespace nids
