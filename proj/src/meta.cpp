#include "nids/meta.hpp"

#include <algorithm>

#include "nids/split.hpp"

namespace nids {

std::array<const DetectorArtifact*, 4> canonical_detectors(DetectorSet detectors) {
    if (detectors.size() != 4)
        throw Error("meta: expected 4 detectors, got " + std::to_string(detectors.size()));
    std::array<const DetectorArtifact*, 4> out{};
    for (const auto* d : detectors) {
        const auto it = std::find(kAttackCategories.begin(), kAttackCategories.end(), d->spec.category);
        if (it == kAttackCategories.end()) throw Error("meta: detector with a non-attack category");
        auto& slot = out[static_cast<std::size_t>(it - kAttackCategories.begin())];
        if (slot) throw Error("meta: two detectors for " + std::string(detector_id(d->spec.category)));
        slot = d;
    }
    return out;
}

FeatureMatrix build_meta_features(DetectorSet detectors, const FeatureMatrix& m) {
    const auto dets = canonical_detectors(detectors);
    const auto schema = schema_digest(m.column_names);
    FeatureMatrix out(m.rows, 4, std::vector<std::string>(kMetaColumns.begin(), kMetaColumns.end()));
    for (std::size_t j = 0; j < 4; ++j) {
        if (dets[j]->schema_digest != schema)
            throw Error("meta: detector " + std::string(detector_id(kAttackCategories[j])) +
                        " was trained on schema " + hex64(dets[j]->schema_digest) + ", matrix has " + hex64(schema));
        const auto p = ensemble_score(*dets[j], m);
        for (std::size_t i = 0; i < m.rows; ++i) out.at(i, j) = p[i];
    }
    return out;
}

OutOfFold out_of_fold_features(std::span<const DetectorSpec> specs, const FeatureMatrix& x,
                               std::span<const AttackCategory> categories, std::size_t k, std::uint64_t seed,
                               std::uint64_t schema_digest, std::uint64_t config_digest) {
    if (k < 2) throw Error("meta: need at least 2 folds");
    if (categories.size() != x.rows) throw ShapeError("meta: category count does not match rows");
    OutOfFold oof;
    std::vector<std::uint32_t> strata;
    for (auto c : categories) strata.push_back(static_cast<std::uint32_t>(index_of(c)));
    oof.fold_of_row = make_stratified_folds(strata, k, seed);
    oof.features = FeatureMatrix(x.rows, 4, std::vector<std::string>(kMetaColumns.begin(), kMetaColumns.end()));
    oof.training_rows.resize(k);

    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> held;
        auto& train_rows = oof.training_rows[f];
        for (std::size_t i = 0; i < x.rows; ++i) (oof.fold_of_row[i] == f ? held : train_rows).push_back(i);
        const FeatureMatrix xt = x.select_rows(train_rows), xh = x.select_rows(held);
        std::vector<AttackCategory> ct;
        for (auto i : train_rows) ct.push_back(categories[i]);

        std::vector<DetectorArtifact> fold_dets;
        for (const auto& spec : specs) {
            auto s = spec;
            s.seed = mix_seed(spec.seed, 0xf01d + f);
            try {
                fold_dets.push_back(train_detector(s, xt, ct, schema_digest, config_digest));
            } catch (const Error& e) {
                throw Error("meta fold " + std::to_string(f) + ": " + e.what() +
                            "; try a different seed so every fold holds both classes");
            }
        }
        std::vector<const DetectorArtifact*> ptrs;
        for (const auto& d : fold_dets) ptrs.push_back(&d);
        const auto fh = build_meta_features(ptrs, xh);
        for (std::size_t r = 0; r < held.size(); ++r)
            for (std::size_t j = 0; j < 4; ++j) oof.features.at(held[r], j) = fh.at(r, j);
    }
    return oof;
}

std::vector<std::string> audit_out_of_fold(const OutOfFold& oof) {
    std::vector<std::string> issues;
    for (std::size_t f = 0; f < oof.training_rows.size(); ++f) {
        std::size_t expected = 0;
        for (auto v : oof.fold_of_row) expected += v != f;
        if (oof.training_rows[f].size() != expected)
            issues.push_back("fold " + std::to_string(f) + ": trained on " + std::to_string(oof.training_rows[f].size()) +
                             " rows, expected " + std::to_string(expected));
        for (auto r : oof.training_rows[f])
            if (r >= oof.fold_of_row.size() || oof.fold_of_row[r] == f)
                issues.push_back("fold " + std::to_string(f) + ": row " + std::to_string(r) + " leaked into training");
    }
    return issues;
}

MetaArtifact train_meta(DetectorSet detectors, const FeatureMatrix& features, std::span<const std::uint8_t> anomaly,
                        const ForestConfig& cfg, std::size_t folds, std::uint64_t config_digest) {
    const auto dets = canonical_detectors(detectors);
    if (features.cols != 4) throw ShapeError("meta: features must have 4 columns");
    if (anomaly.size() != features.rows) throw ShapeError("meta: label count does not match rows");
    MetaArtifact a;
    a.forest_config = cfg;
    for (std::size_t j = 0; j < 4; ++j) a.detector_digests[j] = detector_digest(*dets[j]);
    a.schema_digest = dets[0]->schema_digest;
    a.config_digest = config_digest;
    a.folds = folds;
    a.training_rows = features.rows;
    a.forest = train_random_forest(features, anomaly, cfg);
    const auto p = a.forest.predict_proba(features);
    a.training_accuracy = accuracy(confusion(apply_threshold(p, 0.5), anomaly)).value;
    return a;
}

MetaPrediction predict_anomaly_from_features(const MetaArtifact& meta, FeatureMatrix features) {
    if (features.cols != 4) throw ShapeError("meta: features must have 4 columns");
    MetaPrediction out;
    out.probability = meta.forest.predict_proba(features);
    out.decisions = apply_threshold(out.probability, 0.5);
    out.features = std::move(features);
    return out;
}

MetaPrediction predict_anomaly(const MetaArtifact& meta, DetectorSet detectors, const FeatureMatrix& m) {
    const auto dets = canonical_detectors(detectors);
    for (std::size_t j = 0; j < 4; ++j) {
        const auto d = detector_digest(*dets[j]);
        if (d != meta.detector_digests[j])
            throw Error("meta: detector " + std::string(detector_id(kAttackCategories[j])) + " digest " + hex64(d) +
                        " does not match the one the meta-classifier was trained with (" +
                        hex64(meta.detector_digests[j]) + "); retrain the meta-classifier");
    }
    return predict_anomaly_from_features(meta, build_meta_features(detectors, m));
}

namespace {
constexpr std::uint32_t kMetaPayloadVersion = 1;
}

std::string serialize_meta(const MetaArtifact& a) {
    ByteWriter w;
    w.u32(kMetaPayloadVersion);
    const auto& c = a.forest_config;
    w.u64(c.n_trees);
    w.u64(c.max_depth);
    w.f64(c.class_weight[0]);
    w.f64(c.class_weight[1]);
    w.u64(c.max_features);
    w.u8(c.bootstrap);
    w.u64(c.min_samples_split);
    w.u64(c.rng_seed);
    for (auto d : a.detector_digests) w.u64(d);
    w.u64(a.schema_digest);
    w.u64(a.config_digest);
    w.u64(a.folds);
    w.u64(a.training_rows);
    w.f64(a.training_accuracy);
    write_forest(w, a.forest);
    return w.take();
}

MetaArtifact deserialize_meta(std::string_view payload) {
    ByteReader r(payload);
    const auto version = r.u32();
    if (version != kMetaPayloadVersion) throw FormatError("meta payload: unsupported version " + std::to_string(version));
    MetaArtifact a;
    auto& c = a.forest_config;
    c.n_trees = r.u64();
    c.max_depth = r.u64();
    c.class_weight[0] = r.f64();
    c.class_weight[1] = r.f64();
    c.max_features = r.u64();
    c.bootstrap = r.u8() != 0;
    c.min_samples_split = r.u64();
    c.rng_seed = r.u64();
    for (auto& d : a.detector_digests) d = r.u64();
    a.schema_digest = r.u64();
    a.config_digest = r.u64();
    a.folds = r.u64();
    a.training_rows = r.u64();
    a.training_accuracy = r.f64();
    a.forest = read_forest(r);
    if (!r.done()) throw FormatError("meta payload: trailing bytes");
    if (a.forest.n_features != 4) throw FormatError("meta payload: forest must take 4 features");
    return a;
}

}  // namespace nids
