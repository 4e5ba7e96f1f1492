#include <doctest.h>

#include <algorithm>

#include "nids/detectors.hpp"
#include "nids/rng.hpp"
#include "synthetic_kdd.hpp"

using namespace nids;

namespace {

double grid_best_f1(const std::vector<double>& p, const std::vector<std::uint8_t>& y) {
    double best = 0.0;
    for (int k = 0; k <= 10000; ++k) best = std::max(best, f1(confusion(apply_threshold(p, k * 1e-4), y)).value);
    return best;
}

DetectorSpec small_spec(AttackCategory c, std::uint64_t seed) {
    auto s = build_detector_spec(c);
    s.width_scale = 0.125;
    s.train.epochs = 3;
    s.train.batch_size = 64;
    s.train.validation_fraction = 0.2;
    s.ensemble.forest.n_trees = 12;
    s.ensemble.forest.max_depth = 6;
    s.ensemble.boosting.n_estimators = 8;
    s.ensemble.boosting.max_depth = 3;
    s.seed = seed;
    return s;
}

const testing::SyntheticData& corpus() {
    static const auto d = testing::synthetic_data({}, 11);
    return d;
}

}  // namespace

TEST_CASE("default specs follow the per-category recipes") {
    const auto probe = build_detector_spec(AttackCategory::Probe);
    CHECK(probe.ensemble.enabled);
    CHECK(probe.ensemble.weights == std::array<double, 4>{0.4, 0.3, 0.2, 0.1});
    CHECK(probe.threshold.kind == ThresholdKind::OptimizeF1);
    CHECK(probe.loss.recall_boost == 2.0);

    const auto dos = architecture(ArchitectureId::DosCnnLstm, 122);
    const auto* head = std::get_if<DenseSpec>(&dos.layers.back());
    REQUIRE(head);
    CHECK(head->units == 1);
    CHECK(head->activation == Activation::Sigmoid);

    const auto u2r = architecture(ArchitectureId::U2rLightweight, 122);
    const auto lstm = std::find_if(u2r.layers.begin(), u2r.layers.end(),
                                   [](const LayerSpec& l) { return std::holds_alternative<LstmSpec>(l); });
    REQUIRE(lstm != u2r.layers.end());
    CHECK(std::get<LstmSpec>(*lstm).units == 32);
    CHECK(std::get<LstmSpec>(*lstm).recurrent_dropout == 0.2);
    CHECK(build_detector_spec(AttackCategory::U2R).loss.penalty_factor == 1.0);
    CHECK(build_detector_spec(AttackCategory::R2L).cost_sensitive);
    CHECK_THROWS_AS(build_detector_spec(AttackCategory::Normal), Error);
}

TEST_CASE("every architecture fits the encoded width at full and reduced scale") {
    for (auto id : {ArchitectureId::DosCnnLstm, ArchitectureId::ProbeCnnBiLstmAttn, ArchitectureId::R2lCnnLstm,
                    ArchitectureId::U2rLightweight}) {
        CHECK_NOTHROW(infer_shapes(architecture(id, 122)));
        CHECK_NOTHROW(infer_shapes(architecture(id, 122, 0.125)));
        CHECK(parse_architecture(to_string(id)) == id);
    }
}

TEST_CASE("optimize_threshold matches a dense grid search") {
    Rng rng(5);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 20 + rng.index(180);
        std::vector<double> p(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.bernoulli(0.3);
            p[i] = static_cast<double>(std::clamp<long>(std::lround(rng.uniform(0, 1) * 500 + (y[i] ? 100 : 0)), 1, 499)) / 500;
        }
        y[0] = 1, y[1] = 0;
        const double t = optimize_threshold(p, y);
        const double got = f1(confusion(apply_threshold(p, t), y)).value;
        CHECK(got == doctest::Approx(grid_best_f1(p, y)).epsilon(1e-12));
        CHECK(got >= f1(confusion(apply_threshold(p, 0.5), y)).value);
    }
}

TEST_CASE("optimize_threshold breaks ties toward the lowest candidate") {
    const std::vector<double> p{0.9, 0.9, 0.1, 0.1};
    const std::vector<std::uint8_t> y{1, 1, 0, 0};
    CHECK(optimize_threshold(p, y) == 0.5);
    const std::vector<double> q{0.9, 0.9, 0.6, 0.6};
    CHECK(optimize_threshold(q, y) == 0.9);
    CHECK_THROWS_AS(optimize_threshold(p, std::vector<std::uint8_t>{1, 1, 1, 1}), Error);
}

TEST_CASE("ensemble combination is convex") {
    MemberScores s{{1.0}, {1.0}, {0.0}, {0.0}};
    CHECK(combine_members(s, {0.4, 0.3, 0.2, 0.1})[0] == doctest::Approx(0.7));
    Rng rng(3);
    MemberScores r;
    for (int i = 0; i < 500; ++i) {
        r.neural.push_back(rng.uniform());
        r.forest.push_back(rng.uniform());
        r.boosting.push_back(rng.uniform());
        r.logistic.push_back(rng.uniform());
    }
    r.neural[0] = r.forest[0] = r.boosting[0] = r.logistic[0] = 0.37;
    const auto out = combine_members(r, {0.4, 0.3, 0.2, 0.1});
    CHECK(out[0] == 0.37);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i] >= std::min({r.neural[i], r.forest[i], r.boosting[i], r.logistic[i]}));
        CHECK(out[i] <= std::max({r.neural[i], r.forest[i], r.boosting[i], r.logistic[i]}));
    }
}

TEST_CASE("inverse frequency weights average to one") {
    std::vector<std::uint8_t> y(100, 0);
    std::fill(y.begin(), y.begin() + 10, 1);
    const auto w = inverse_frequency_weights(y);
    CHECK((w[0] + w[1]) / 2 == doctest::Approx(1.0));
    CHECK(w[1] / w[0] == doctest::Approx(9.0));
}

TEST_CASE("training keeps the validation fold out of resampling") {
    const auto& d = corpus();
    const auto a = train_detector(small_spec(AttackCategory::R2L, 1), d.x, d.dataset.categories, d.state.schema(), 7);
    const auto dist = class_distribution(d.dataset);
    CHECK(a.folds.train_rows + a.folds.validation_rows == d.x.rows);
    CHECK(a.folds.train_positives + a.folds.validation_positives == dist.count(AttackCategory::R2L));
    CHECK(a.folds.resampled_positives > a.folds.train_positives);
    CHECK(a.folds.resampled_rows - a.folds.train_rows == a.folds.resampled_positives - a.folds.train_positives);
    CHECK(a.threshold.threshold == 0.5);
    CHECK(a.spec.train.class_weights[0] == doctest::Approx(1.0));
    CHECK(a.spec.train.class_weights[1] == doctest::Approx(1.0));
    CHECK(a.history_digest == digest_history(a.history));
    CHECK(a.config_digest == 7);
}

TEST_CASE("cost-sensitive weights follow the fold the network sees") {
    const auto& d = corpus();
    auto spec = small_spec(AttackCategory::R2L, 1);
    spec.resample.method = ResampleMethod::None;
    spec.train.epochs = 1;
    const auto a = train_detector(spec, d.x, d.dataset.categories, d.state.schema(), 0);
    const double ratio = static_cast<double>(a.folds.train_rows - a.folds.train_positives) /
                         static_cast<double>(a.folds.train_positives);
    CHECK(a.spec.train.class_weights[1] / a.spec.train.class_weights[0] == doctest::Approx(ratio));
}

TEST_CASE("normal-only negatives drop other attack rows") {
    const auto& d = corpus();
    auto spec = small_spec(AttackCategory::U2R, 2);
    spec.negatives = NegativePolicy::NormalOnly;
    spec.ensemble.enabled = false;
    const auto a = train_detector(spec, d.x, d.dataset.categories, d.state.schema(), 0);
    const auto dist = class_distribution(d.dataset);
    CHECK(a.folds.train_rows + a.folds.validation_rows ==
          dist.count(AttackCategory::Normal) + dist.count(AttackCategory::U2R));
}

TEST_CASE("ensemble detector: threshold, detect and persistence") {
    const auto& d = corpus();
    const auto spec = small_spec(AttackCategory::Probe, 3);
    const auto a = train_detector(spec, d.x, d.dataset.categories, d.state.schema(), 0);
    REQUIRE(a.has_members());
    CHECK(a.threshold.threshold > 0.0);
    CHECK(a.threshold.threshold < 1.0);
    CHECK(a.threshold.f1_at_threshold >= a.threshold.f1_at_half);
    CHECK_FALSE(a.threshold.pr_curve.empty());

    const auto det = detect(a, d.x);
    for (std::size_t i = 0; i < det.probabilities.size(); ++i)
        CHECK(det.decisions[i] == (det.probabilities[i] >= a.threshold.threshold));

    const auto bytes = serialize_detector(a);
    const auto b = deserialize_detector(bytes);
    CHECK(serialize_detector(b) == bytes);
    CHECK(b.spec.category == AttackCategory::Probe);
    CHECK(ensemble_score(b, d.x) == det.probabilities);

    const auto again = train_detector(spec, d.x, d.dataset.categories, d.state.schema(), 0);
    CHECK(serialize_detector(again) == bytes);

    auto broken = bytes;
    broken.pop_back();
    CHECK_THROWS(deserialize_detector(broken));

    FeatureMatrix narrow(2, d.x.cols - 1);
    CHECK_THROWS_AS(detect(a, narrow), ShapeError);
}

TEST_CASE("separable data reaches validation F1 of one") {
    FeatureMatrix x(300, 12);
    std::vector<AttackCategory> cats;
    Rng rng(9);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const bool pos = i % 5 == 0;
        for (std::size_t c = 0; c < x.cols; ++c) x.at(i, c) = rng.normal() * 0.3 + (pos ? 2.0 : -2.0);
        cats.push_back(pos ? AttackCategory::U2R : AttackCategory::Normal);
    }
    const auto a = train_detector(small_spec(AttackCategory::U2R, 4), x, cats, 0, 0);
    CHECK(a.threshold.f1_at_threshold == 1.0);
    CHECK(a.threshold.threshold > 0.0);
    CHECK(a.threshold.threshold < 1.0);
}

TEST_CASE("training without positives fails") {
    FeatureMatrix x(20, 8);
    std::vector<AttackCategory> cats(20, AttackCategory::Normal);
    cats[0] = AttackCategory::DoS;
    CHECK_THROWS_WITH_AS(train_detector(small_spec(AttackCategory::U2R, 1), x, cats, 0, 0), "train_detector(u2r): no positive rows",
                         Error);
}
