#include "nids/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nids/binary_io.hpp"
#include "nids/split.hpp"

namespace nids {

std::string_view to_string(ArchitectureId a) {
    switch (a) {
        case ArchitectureId::DosCnnLstm: return "dos_cnn_lstm";
        case ArchitectureId::ProbeCnnBiLstmAttn: return "probe_cnn_bilstm_attn";
        case ArchitectureId::R2lCnnLstm: return "r2l_cnn_lstm";
        case ArchitectureId::U2rLightweight: return "u2r_lightweight";
    }
    return "dos_cnn_lstm";
}

std::optional<ArchitectureId> parse_architecture(std::string_view s) {
    for (auto a : {ArchitectureId::DosCnnLstm, ArchitectureId::ProbeCnnBiLstmAttn, ArchitectureId::R2lCnnLstm,
                   ArchitectureId::U2rLightweight})
        if (to_string(a) == s) return a;
    return std::nullopt;
}

NetworkSpec architecture(ArchitectureId id, std::size_t input_width, double width_scale) {
    if (!(width_scale > 0)) throw Error("architecture: width_scale must be positive");
    const auto w = [&](std::size_t n) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(n) * width_scale)));
    };
    const auto conv = [&](std::size_t f) { return Conv1DSpec{w(f), 3, Padding::Valid, Activation::ReLU}; };
    const DenseSpec head{1, Activation::Sigmoid};
    NetworkSpec s{std::string(to_string(id)), input_width, {}};
    switch (id) {
        case ArchitectureId::DosCnnLstm:
            s.layers = {conv(64), conv(64), MaxPool1DSpec{2}, conv(128), conv(128), MaxPool1DSpec{2}, BatchNormSpec{},
                        LstmSpec{w(100), 0.1, 0.0, false}, DropoutSpec{0.5}, head};
            break;
        case ArchitectureId::ProbeCnnBiLstmAttn:
            s.layers = {conv(64),
                        BatchNormSpec{},
                        ResidualSpec{w(64), 3},
                        MaxPool1DSpec{2},
                        DropoutSpec{0.2},
                        conv(128),
                        conv(128),
                        BatchNormSpec{},
                        MaxPool1DSpec{2},
                        DropoutSpec{0.3},
                        AttentionSpec{4, w(32)},
                        BiLstmSpec{w(64), w(32)},
                        DenseSpec{w(128), Activation::ReLU},
                        DropoutSpec{0.3},
                        DenseSpec{w(64), Activation::ReLU},
                        DropoutSpec{0.3},
                        head};
            break;
        case ArchitectureId::R2lCnnLstm:
            s.layers = {conv(64), MaxPool1DSpec{2}, conv(128), MaxPool1DSpec{2}, LstmSpec{w(100), 0.1, 0.0, false}, head};
            break;
        case ArchitectureId::U2rLightweight:
            s.layers = {conv(32),
                        MaxPool1DSpec{2},
                        DropoutSpec{0.2},
                        conv(64),
                        MaxPool1DSpec{2},
                        DropoutSpec{0.3},
                        LstmSpec{w(32), 0.2, 0.2, false},
                        DenseSpec{w(16), Activation::ReLU},
                        DropoutSpec{0.4},
                        head};
            break;
    }
    return s;
}

void DetectorSpec::validate() const {
    if (category == AttackCategory::Normal) throw Error("detector spec: category must be an attack category");
    if (!(width_scale > 0)) throw Error("detector spec: width_scale must be positive");
    train.validate();
    loss.validate();
    if (ensemble.enabled) {
        const double sum = std::accumulate(ensemble.weights.begin(), ensemble.weights.end(), 0.0);
        if (std::abs(sum - 1.0) > 1e-9) throw Error("detector spec: ensemble weights must sum to 1");
        for (double v : ensemble.weights)
            if (v < 0) throw Error("detector spec: ensemble weights must be non-negative");
        ensemble.forest.validate();
        ensemble.boosting.validate();
        ensemble.logistic.validate();
    }
    if (threshold.kind == ThresholdKind::Fixed && !(threshold.fixed > 0 && threshold.fixed < 1))
        throw Error("detector spec: fixed threshold must be in (0,1)");
}

std::string DetectorSpec::describe() const {
    std::string s = std::string(detector_id(category)) + " arch=" + std::string(to_string(architecture));
    s += " width_scale=" + format_double(width_scale);
    s += " resample=" + std::string(to_string(resample.method)) + "(k=" + std::to_string(resample.k_neighbors) +
         ",ratio=" + format_double(resample.target_ratio) + ")";
    s += " focal(alpha=" + format_double(loss.alpha) + ",gamma=" + format_double(loss.gamma) +
         ",recall_boost=" + format_double(loss.recall_boost) + ",penalty=" + format_double(loss.penalty_factor) + ")";
    s += cost_sensitive ? " cost_sensitive" : "";
    if (ensemble.enabled)
        s += " ensemble(" + format_double(ensemble.weights[0]) + "," + format_double(ensemble.weights[1]) + "," +
             format_double(ensemble.weights[2]) + "," + format_double(ensemble.weights[3]) + ")";
    s += threshold.kind == ThresholdKind::OptimizeF1 ? " threshold=optimize_f1"
                                                     : " threshold=" + format_double(threshold.fixed);
    s += negatives == NegativePolicy::AllOthers ? " negatives=all" : " negatives=normal";
    return s;
}

DetectorSpec build_detector_spec(AttackCategory category) {
    DetectorSpec s;
    s.category = category;
    switch (category) {
        case AttackCategory::Normal: throw Error("build_detector_spec: there is no detector for Normal");
        case AttackCategory::DoS: s.architecture = ArchitectureId::DosCnnLstm; break;
        case AttackCategory::Probe:
            s.architecture = ArchitectureId::ProbeCnnBiLstmAttn;
            s.loss.recall_boost = 2.0;
            s.ensemble.enabled = true;
            s.threshold.kind = ThresholdKind::OptimizeF1;
            break;
        case AttackCategory::R2L:
            s.architecture = ArchitectureId::R2lCnnLstm;
            s.cost_sensitive = true;
            break;
        case AttackCategory::U2R:
            s.architecture = ArchitectureId::U2rLightweight;
            s.loss.recall_boost = 3.0;
            s.loss.penalty_factor = 1.0;
            s.resample.target_ratio = 0.1;
            s.ensemble.enabled = true;
            s.threshold.kind = ThresholdKind::OptimizeF1;
            break;
    }
    s.ensemble.forest.class_weight = {1.0, 5.0};
    s.ensemble.logistic.class_weight = {1.0, 4.0};
    return s;
}

std::array<double, 2> inverse_frequency_weights(std::span<const std::uint8_t> labels) {
    double n1 = 0;
    for (auto y : labels) n1 += y != 0;
    const double n0 = static_cast<double>(labels.size()) - n1;
    if (n0 == 0 || n1 == 0) return {1.0, 1.0};
    const double i0 = 1.0 / n0, i1 = 1.0 / n1, mean = (i0 + i1) / 2;
    return {i0 / mean, i1 / mean};
}

double optimize_threshold(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    if (probs.size() != labels.size()) throw ShapeError("optimize_threshold: length mismatch");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < probs.size(); ++i) (labels[i] ? pos : neg).push_back(probs[i]);
    if (pos.empty() || neg.empty()) throw Error("optimize_threshold: labels contain a single class");
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    std::vector<double> candidates(probs.begin(), probs.end());
    candidates.push_back(0.5);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::erase_if(candidates, [](double t) { return !(t > 0.0 && t < 1.0); });

    const auto at_or_above = [](const std::vector<double>& v, double t) {
        return static_cast<std::size_t>(v.end() - std::lower_bound(v.begin(), v.end(), t));
    };
    double best_t = 0.5, best_f1 = -1.0;
    for (double t : candidates) {
        ConfusionMatrix cm;
        cm.tp = at_or_above(pos, t);
        cm.fn = pos.size() - cm.tp;
        cm.fp = at_or_above(neg, t);
        cm.tn = neg.size() - cm.fp;
        const double f = f1(cm).value;
        if (f > best_f1) best_f1 = f, best_t = t;
    }
    return best_t;
}

Network DetectorArtifact::build_network() const {
    Network net(architecture(spec.architecture, input_width, spec.width_scale), 0);
    net.import_state(network_state);
    return net;
}

std::uint64_t digest_history(std::span<const EpochRecord> h) {
    Fnv1a f;
    for (const auto& e : h) {
        f.update_u64(e.epoch);
        f.update_f64(e.train_loss).update_f64(e.val_loss).update_f64(e.val_accuracy).update_f64(e.val_f1);
        f.update_f64(e.learning_rate);
    }
    return f.value();
}

namespace {

std::vector<std::uint8_t> pick(std::span<const std::uint8_t> v, std::span<const std::size_t> idx) {
    std::vector<std::uint8_t> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

std::size_t count_pos(std::span<const std::uint8_t> v) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](auto y) { return y != 0; }));
}

}  // namespace

DetectorArtifact train_detector(const DetectorSpec& input_spec, const FeatureMatrix& x,
                                std::span<const AttackCategory> categories, std::uint64_t schema_digest,
                                std::uint64_t config_digest) {
    input_spec.validate();
    if (categories.size() != x.rows) throw ShapeError("train_detector: category count does not match rows");
    DetectorArtifact a;
    a.spec = input_spec;
    auto& spec = a.spec;
    spec.resample.rng_seed = mix_seed(spec.seed, 2);
    spec.train.rng_seed = mix_seed(spec.seed, 4);
    spec.ensemble.forest.rng_seed = mix_seed(spec.seed, 5);
    spec.ensemble.boosting.rng_seed = mix_seed(spec.seed, 6);
    a.config_digest = config_digest;
    a.schema_digest = schema_digest;
    a.input_width = x.cols;

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < x.rows; ++i)
        if (spec.negatives == NegativePolicy::AllOthers || categories[i] == spec.category ||
            categories[i] == AttackCategory::Normal)
            rows.push_back(i);
    std::vector<std::uint8_t> labels;
    std::vector<std::uint32_t> strata;
    for (auto i : rows) {
        labels.push_back(categories[i] == spec.category);
        strata.push_back(static_cast<std::uint32_t>(index_of(categories[i])));
    }
    if (count_pos(labels) == 0)
        throw Error("train_detector(" + std::string(detector_id(spec.category)) + "): no positive rows");
    if (count_pos(labels) == labels.size())
        throw Error("train_detector(" + std::string(detector_id(spec.category)) + "): no negative rows");

    const auto split = stratified_split(strata, spec.train.validation_fraction, mix_seed(spec.seed, 1));
    std::vector<std::size_t> train_rows, val_rows;
    for (auto i : split.train) train_rows.push_back(rows[i]);
    for (auto i : split.holdout) val_rows.push_back(rows[i]);
    const FeatureMatrix xt = x.select_rows(train_rows), xv = x.select_rows(val_rows);
    const auto yt = pick(labels, split.train), yv = pick(labels, split.holdout);
    if (count_pos(yv) == 0 || count_pos(yv) == yv.size())
        throw Error("train_detector(" + std::string(detector_id(spec.category)) +
                    "): validation fold holds a single class; raise the validation fraction or add data");

    const auto rs = resample(xt, yt, spec.resample);
    a.warnings = rs.warnings;
    a.folds = {xt.rows, count_pos(yt), rs.matrix.rows, count_pos(rs.labels), xv.rows, count_pos(yv)};

    TrainConfig tc = spec.train;
    if (spec.cost_sensitive) tc.class_weights = inverse_frequency_weights(rs.labels);
    spec.train.class_weights = tc.class_weights;

    Network net(architecture(spec.architecture, x.cols, spec.width_scale), mix_seed(spec.seed, 3));
    const auto tr = train(net, rs.matrix, rs.labels, xv, yv, tc, spec.loss);
    a.history = tr.history;
    a.best_epoch = tr.best_epoch;
    a.history_digest = digest_history(a.history);
    a.network_state = net.export_state();

    if (spec.ensemble.enabled) {
        const FeatureMatrix& mx = spec.ensemble.members_on_resampled ? rs.matrix : xt;
        const std::span<const std::uint8_t> my = spec.ensemble.members_on_resampled ? std::span(rs.labels) : std::span(yt);
        a.forest = train_random_forest(mx, my, spec.ensemble.forest);
        a.boosting = train_gradient_boosting(mx, my, spec.ensemble.boosting);
        a.logistic = train_logistic_regression(mx, my, spec.ensemble.logistic);
    }

    const auto vp = ensemble_score(a, xv);
    auto& th = a.threshold;
    th.threshold = spec.threshold.kind == ThresholdKind::OptimizeF1 ? optimize_threshold(vp, yv) : spec.threshold.fixed;
    th.pr_curve = pr_curve(vp, yv);
    const auto half = confusion(apply_threshold(vp, 0.5), yv);
    const auto chosen = confusion(apply_threshold(vp, th.threshold), yv);
    th.recall_at_half = recall(half).value;
    th.f1_at_half = f1(half).value;
    th.recall_at_threshold = recall(chosen).value;
    th.f1_at_threshold = f1(chosen).value;
    return a;
}

MemberScores member_scores(const DetectorArtifact& a, const FeatureMatrix& m) {
    if (m.cols != a.input_width)
        throw ShapeError("detector " + std::string(detector_id(a.spec.category)) + ": matrix has " +
                         std::to_string(m.cols) + " columns, artifact expects " + std::to_string(a.input_width));
    MemberScores s;
    auto net = a.build_network();
    s.neural = net.predict_proba(m);
    if (a.has_members()) {
        if (!a.boosting || !a.logistic) throw FormatError("detector artifact: incomplete ensemble members");
        s.forest = a.forest->predict_proba(m);
        s.boosting = a.boosting->predict_proba(m);
        s.logistic = a.logistic->predict_proba(m);
    }
    return s;
}

std::vector<double> combine_members(const MemberScores& s, const std::array<double, 4>& w) {
    const std::size_t n = s.neural.size();
    if (s.forest.size() != n || s.boosting.size() != n || s.logistic.size() != n)
        throw ShapeError("ensemble: member score lengths differ");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = w[0] * s.neural[i] + w[1] * s.forest[i] + w[2] * s.boosting[i] + w[3] * s.logistic[i];
        const double lo = std::min({s.neural[i], s.forest[i], s.boosting[i], s.logistic[i]});
        const double hi = std::max({s.neural[i], s.forest[i], s.boosting[i], s.logistic[i]});
        out[i] = std::clamp(v, lo, hi);
    }
    return out;
}

std::vector<double> ensemble_score(const DetectorArtifact& a, const FeatureMatrix& m) {
    auto s = member_scores(a, m);
    if (!a.has_members()) return std::move(s.neural);
    return combine_members(s, a.spec.ensemble.weights);
}

Detection detect(const DetectorArtifact& a, const FeatureMatrix& m) {
    Detection d;
    d.probabilities = ensemble_score(a, m);
    d.decisions = apply_threshold(d.probabilities, a.threshold.threshold);
    return d;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kDetectorPayloadVersion = 1;

void write_tensor(ByteWriter& w, const Tensor& t) {
    std::vector<std::uint64_t> shape(t.shape.begin(), t.shape.end());
    w.u64s(shape);
    w.f64s(t.data);
}

Tensor read_tensor(ByteReader& r) {
    const auto shape = r.u64s();
    std::vector<std::size_t> s(shape.begin(), shape.end());
    auto data = r.f64s();
    return Tensor(std::move(s), std::move(data));
}

void write_spec(ByteWriter& w, const DetectorSpec& s) {
    w.u8(static_cast<std::uint8_t>(s.category));
    w.u8(static_cast<std::uint8_t>(s.architecture));
    w.f64(s.width_scale);
    w.u8(static_cast<std::uint8_t>(s.resample.method));
    w.u64(s.resample.k_neighbors);
    w.f64(s.resample.target_ratio);
    w.u64(s.resample.rng_seed);
    w.f64(s.loss.alpha);
    w.f64(s.loss.gamma);
    w.f64(s.loss.recall_boost);
    w.f64(s.loss.penalty_factor);
    const auto& t = s.train;
    w.u64(t.epochs);
    w.u64(t.batch_size);
    w.f64(t.learning_rate);
    w.f64(t.adam.beta1);
    w.f64(t.adam.beta2);
    w.f64(t.adam.epsilon);
    w.u8(static_cast<std::uint8_t>(t.schedule.kind));
    w.f64(t.schedule.factor);
    w.u64(t.schedule.patience);
    w.f64(t.schedule.min_lr);
    w.u64(t.patience);
    w.u8(static_cast<std::uint8_t>(t.monitor));
    w.u8(t.restore_best);
    w.f64(t.validation_fraction);
    w.u64(t.rng_seed);
    w.f64(t.class_weights[0]);
    w.f64(t.class_weights[1]);
    w.u8(s.cost_sensitive);
    const auto& e = s.ensemble;
    w.u8(e.enabled);
    for (double v : e.weights) w.f64(v);
    w.u64(e.forest.n_trees);
    w.u64(e.forest.max_depth);
    w.f64(e.forest.class_weight[0]);
    w.f64(e.forest.class_weight[1]);
    w.u64(e.forest.max_features);
    w.u8(e.forest.bootstrap);
    w.u64(e.forest.min_samples_split);
    w.u64(e.forest.rng_seed);
    w.u64(e.boosting.n_estimators);
    w.u64(e.boosting.max_depth);
    w.f64(e.boosting.learning_rate);
    w.u64(e.boosting.min_samples_split);
    w.u64(e.boosting.rng_seed);
    w.u64(e.logistic.max_iterations);
    w.f64(e.logistic.class_weight[0]);
    w.f64(e.logistic.class_weight[1]);
    w.f64(e.logistic.tolerance);
    w.f64(e.logistic.l2);
    w.u8(e.logistic.fit_intercept);
    w.u8(e.members_on_resampled);
    w.u8(static_cast<std::uint8_t>(s.threshold.kind));
    w.f64(s.threshold.fixed);
    w.u8(static_cast<std::uint8_t>(s.negatives));
    w.u64(s.seed);
}

template <typename E>
E read_enum(ByteReader& r, std::uint8_t max, const char* what) {
    const auto v = r.u8();
    if (v > max) throw FormatError(std::string("detector payload: bad ") + what);
    return static_cast<E>(v);
}

DetectorSpec read_spec(ByteReader& r) {
    DetectorSpec s;
    s.category = read_enum<AttackCategory>(r, 4, "category");
    s.architecture = read_enum<ArchitectureId>(r, 3, "architecture");
    s.width_scale = r.f64();
    s.resample.method = read_enum<ResampleMethod>(r, 3, "resample method");
    s.resample.k_neighbors = r.u64();
    s.resample.target_ratio = r.f64();
    s.resample.rng_seed = r.u64();
    s.loss.alpha = r.f64();
    s.loss.gamma = r.f64();
    s.loss.recall_boost = r.f64();
    s.loss.penalty_factor = r.f64();
    auto& t = s.train;
    t.epochs = r.u64();
    t.batch_size = r.u64();
    t.learning_rate = r.f64();
    t.adam.beta1 = r.f64();
    t.adam.beta2 = r.f64();
    t.adam.epsilon = r.f64();
    t.schedule.kind = read_enum<LrScheduleKind>(r, 1, "schedule");
    t.schedule.factor = r.f64();
    t.schedule.patience = r.u64();
    t.schedule.min_lr = r.f64();
    t.patience = r.u64();
    t.monitor = read_enum<Monitor>(r, 1, "monitor");
    t.restore_best = r.u8() != 0;
    t.validation_fraction = r.f64();
    t.rng_seed = r.u64();
    t.class_weights[0] = r.f64();
    t.class_weights[1] = r.f64();
    s.cost_sensitive = r.u8() != 0;
    auto& e = s.ensemble;
    e.enabled = r.u8() != 0;
    for (double& v : e.weights) v = r.f64();
    e.forest.n_trees = r.u64();
    e.forest.max_depth = r.u64();
    e.forest.class_weight[0] = r.f64();
    e.forest.class_weight[1] = r.f64();
    e.forest.max_features = r.u64();
    e.forest.bootstrap = r.u8() != 0;
    e.forest.min_samples_split = r.u64();
    e.forest.rng_seed = r.u64();
    e.boosting.n_estimators = r.u64();
    e.boosting.max_depth = r.u64();
    e.boosting.learning_rate = r.f64();
    e.boosting.min_samples_split = r.u64();
    e.boosting.rng_seed = r.u64();
    e.logistic.max_iterations = r.u64();
    e.logistic.class_weight[0] = r.f64();
    e.logistic.class_weight[1] = r.f64();
    e.logistic.tolerance = r.f64();
    e.logistic.l2 = r.f64();
    e.logistic.fit_intercept = r.u8() != 0;
    e.members_on_resampled = r.u8() != 0;
    s.threshold.kind = read_enum<ThresholdKind>(r, 1, "threshold policy");
    s.threshold.fixed = r.f64();
    s.negatives = read_enum<NegativePolicy>(r, 1, "negative policy");
    s.seed = r.u64();
    return s;
}

}  // namespace

std::string serialize_detector(const DetectorArtifact& a) {
    ByteWriter w;
    w.u32(kDetectorPayloadVersion);
    write_spec(w, a.spec);
    w.u64(a.config_digest);
    w.u64(a.schema_digest);
    w.u64(a.input_width);
    w.u64(a.network_state.size());
    for (const auto& t : a.network_state) write_tensor(w, t);
    w.u8(a.has_members());
    if (a.has_members()) {
        write_forest(w, *a.forest);
        write_boosting(w, *a.boosting);
        write_logistic(w, *a.logistic);
    }
    const auto& th = a.threshold;
    w.f64(th.threshold);
    w.u64(th.pr_curve.size());
    for (const auto& p : th.pr_curve) w.f64(p.recall), w.f64(p.precision), w.f64(p.threshold);
    w.f64(th.recall_at_half);
    w.f64(th.f1_at_half);
    w.f64(th.recall_at_threshold);
    w.f64(th.f1_at_threshold);
    w.u64(a.history.size());
    for (const auto& e : a.history) {
        w.u64(e.epoch);
        w.f64(e.train_loss);
        w.f64(e.val_loss);
        w.f64(e.val_accuracy);
        w.f64(e.val_f1);
        w.f64(e.learning_rate);
    }
    w.u64(a.history_digest);
    w.u64(a.best_epoch);
    const auto& f = a.folds;
    for (auto v : {f.train_rows, f.train_positives, f.resampled_rows, f.resampled_positives, f.validation_rows,
                   f.validation_positives})
        w.u64(v);
    w.u64(a.warnings.size());
    for (const auto& s : a.warnings) w.str(s);
    return w.take();
}

DetectorArtifact deserialize_detector(std::string_view payload) {
    ByteReader r(payload);
    const auto version = r.u32();
    if (version != kDetectorPayloadVersion)
        throw FormatError("detector payload: unsupported version " + std::to_string(version));
    DetectorArtifact a;
    a.spec = read_spec(r);
    a.config_digest = r.u64();
    a.schema_digest = r.u64();
    a.input_width = r.u64();
    a.network_state.resize(r.length(16));
    for (auto& t : a.network_state) t = read_tensor(r);
    if (r.u8()) {
        a.forest = read_forest(r);
        a.boosting = read_boosting(r);
        a.logistic = read_logistic(r);
    }
    auto& th = a.threshold;
    th.threshold = r.f64();
    th.pr_curve.resize(r.length(24));
    for (auto& p : th.pr_curve) p.recall = r.f64(), p.precision = r.f64(), p.threshold = r.f64();
    th.recall_at_half = r.f64();
    th.f1_at_half = r.f64();
    th.recall_at_threshold = r.f64();
    th.f1_at_threshold = r.f64();
    a.history.resize(r.length(48));
    for (auto& e : a.history) {
        e.epoch = r.u64();
        e.train_loss = r.f64();
        e.val_loss = r.f64();
        e.val_accuracy = r.f64();
        e.val_f1 = r.f64();
        e.learning_rate = r.f64();
    }
    a.history_digest = r.u64();
    a.best_epoch = r.u64();
    auto& f = a.folds;
    for (auto* v : {&f.train_rows, &f.train_positives, &f.resampled_rows, &f.resampled_positives, &f.validation_rows,
                    &f.validation_positives})
        *v = r.u64();
    a.warnings.resize(r.length(8));
    for (auto& s : a.warnings) s = r.str();
    if (!r.done()) throw FormatError("detector payload: trailing bytes");
    if (a.history_digest != digest_history(a.history)) throw FormatError("detector payload: history digest mismatch");
    a.build_network();  // validates the state against the architecture
    return a;
}

std::uint64_t detector_digest(const DetectorArtifact& a) { return digest(serialize_detector(a)); }

}  // namespace nids
