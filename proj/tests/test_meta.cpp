#include <doctest.h>

#include <algorithm>

#include "nids/meta.hpp"
#include "synthetic_kdd.hpp"

using namespace nids;

namespace {

DetectorSpec tiny_spec(AttackCategory c) {
    auto s = build_detector_spec(c);
    s.width_scale = 0.125;
    s.train.epochs = 1;
    s.train.batch_size = 64;
    s.train.validation_fraction = 0.2;
    s.ensemble.forest.n_trees = 5;
    s.ensemble.forest.max_depth = 4;
    s.ensemble.boosting.n_estimators = 3;
    s.ensemble.boosting.max_depth = 2;
    s.seed = 21 + index_of(c);
    return s;
}

struct Fixture {
    testing::SyntheticData data;
    std::vector<DetectorArtifact> detectors;
    std::vector<const DetectorArtifact*> ptrs;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture f;
        f.data = testing::synthetic_data({200, 120, 60, 40, 20}, 17);
        for (auto c : kAttackCategories)
            f.detectors.push_back(train_detector(tiny_spec(c), f.data.x, f.data.dataset.categories, f.data.state.schema(), 0));
        for (const auto& d : f.detectors) f.ptrs.push_back(&d);
        return f;
    }();
    return f;
}

ForestConfig small_forest() {
    ForestConfig c;
    c.n_trees = 25;
    c.max_depth = 5;
    c.rng_seed = 3;
    return c;
}

}  // namespace

TEST_CASE("meta features follow canonical order whatever the input order") {
    const auto& f = fixture();
    const auto a = build_meta_features(f.ptrs, f.data.x);
    std::vector<const DetectorArtifact*> reversed(f.ptrs.rbegin(), f.ptrs.rend());
    const auto b = build_meta_features(reversed, f.data.x);
    CHECK(a.values == b.values);
    CHECK(a.column_names == std::vector<std::string>{"p_dos", "p_probe", "p_r2l", "p_u2r"});
    for (std::size_t j = 0; j < 4; ++j) {
        const auto p = ensemble_score(f.detectors[j], f.data.x);
        for (std::size_t i = 0; i < a.rows; ++i) REQUIRE(a.at(i, j) == p[i]);
    }
}

TEST_CASE("meta features refuse a foreign schema or an incomplete set") {
    const auto& f = fixture();
    FeatureMatrix other = f.data.x;
    other.column_names.back() += "_x";
    CHECK_THROWS_AS(build_meta_features(f.ptrs, other), Error);
    std::vector<const DetectorArtifact*> three(f.ptrs.begin(), f.ptrs.begin() + 3);
    CHECK_THROWS_AS(build_meta_features(three, f.data.x), Error);
    std::vector<const DetectorArtifact*> dup{f.ptrs[0], f.ptrs[0], f.ptrs[2], f.ptrs[3]};
    CHECK_THROWS_AS(build_meta_features(dup, f.data.x), Error);
}

TEST_CASE("out-of-fold features come from detectors that never saw the row") {
    const auto& f = fixture();
    std::vector<DetectorSpec> specs;
    for (auto c : kAttackCategories) specs.push_back(tiny_spec(c));
    auto oof = out_of_fold_features(specs, f.data.x, f.data.dataset.categories, 3, 5, f.data.state.schema(), 0);
    CHECK(audit_out_of_fold(oof).empty());
    CHECK(oof.features.rows == f.data.x.rows);
    CHECK(oof.features.all_finite());
    // Every fold holds a share of each category.
    for (std::uint32_t k = 0; k < 3; ++k)
        for (auto c : kAllCategories) {
            bool seen = false;
            for (std::size_t i = 0; i < oof.fold_of_row.size(); ++i)
                seen |= oof.fold_of_row[i] == k && f.data.dataset.categories[i] == c;
            CHECK(seen);
        }
    oof.training_rows[1].push_back(static_cast<std::size_t>(
        std::find(oof.fold_of_row.begin(), oof.fold_of_row.end(), 1u) - oof.fold_of_row.begin()));
    CHECK_FALSE(audit_out_of_fold(oof).empty());
}

TEST_CASE("meta over oracle features recovers the labels") {
    const auto& f = fixture();
    const auto y = anomaly_labels(f.data.dataset.categories);
    FeatureMatrix oracle(y.size(), 4);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < 4; ++j) oracle.at(i, j) = y[i];
    const auto meta = train_meta(f.ptrs, oracle, y, small_forest(), 5, 0);
    CHECK(meta.training_accuracy == 1.0);
    CHECK(predict_anomaly_from_features(meta, oracle).decisions == y);
}

TEST_CASE("constant meta features predict the majority label") {
    const auto& f = fixture();
    const auto y = anomaly_labels(f.data.dataset.categories);
    FeatureMatrix flat(y.size(), 4);
    std::fill(flat.values.begin(), flat.values.end(), 0.25);
    const auto meta = train_meta(f.ptrs, flat, y, small_forest(), 5, 0);
    const std::size_t attacks = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    const std::uint8_t majority = 2 * attacks > y.size();
    for (auto d : predict_anomaly_from_features(meta, flat).decisions) CHECK(d == majority);
}

TEST_CASE("meta decisions depend only on the feature vector") {
    const auto& f = fixture();
    const auto y = anomaly_labels(f.data.dataset.categories);
    const auto features = build_meta_features(f.ptrs, f.data.x);
    const auto meta = train_meta(f.ptrs, features, y, small_forest(), 5, 0);
    FeatureMatrix twin(2, 4);
    for (std::size_t j = 0; j < 4; ++j) twin.at(0, j) = twin.at(1, j) = features.at(7, j);
    const auto pred = predict_anomaly_from_features(meta, twin);
    CHECK(pred.probability[0] == pred.probability[1]);
    CHECK(pred.decisions[0] == pred.decisions[1]);

    const auto full = predict_anomaly(meta, f.ptrs, f.data.x);
    for (std::size_t i = 0; i < full.decisions.size(); ++i) CHECK(full.decisions[i] == (full.probability[i] >= 0.5));
    CHECK(full.probability == meta.forest.predict_proba(features));

    const auto bytes = serialize_meta(meta);
    CHECK(serialize_meta(deserialize_meta(bytes)) == bytes);
}

TEST_CASE("meta refuses detectors whose digest changed") {
    const auto& f = fixture();
    const auto y = anomaly_labels(f.data.dataset.categories);
    const auto meta = train_meta(f.ptrs, build_meta_features(f.ptrs, f.data.x), y, small_forest(), 5, 0);
    auto altered = f.detectors[2];
    altered.threshold.threshold = 0.42;
    std::vector<const DetectorArtifact*> ptrs{f.ptrs[0], f.ptrs[1], &altered, f.ptrs[3]};
    CHECK_THROWS_WITH_AS(predict_anomaly(meta, ptrs, f.data.x), doctest::Contains("detector r2l digest"), Error);
}
