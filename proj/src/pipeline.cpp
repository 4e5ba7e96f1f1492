#include "nids/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

#include "nids/artifact.hpp"
#include "nids/split.hpp"

namespace nids {

std::optional<TrainScope> parse_train_scope(std::string_view s) {
    if (s == "dos") return TrainScope::Dos;
    if (s == "probe") return TrainScope::Probe;
    if (s == "r2l") return TrainScope::R2l;
    if (s == "u2r") return TrainScope::U2r;
    if (s == "meta") return TrainScope::Meta;
    if (s == "all") return TrainScope::All;
    return std::nullopt;
}

std::filesystem::path ArtifactLayout::detector(AttackCategory c) const {
    return root / ("detector_" + std::string(detector_id(c)) + ".nids");
}

namespace {

const std::filesystem::path& source_path(const ExperimentConfig& cfg, DatasetSource s) {
    switch (s) {
        case DatasetSource::Train: return cfg.paths.train;
        case DatasetSource::TestPlus: return cfg.paths.test_plus;
        case DatasetSource::Test21: return cfg.paths.test_21;
        case DatasetSource::Other: break;
    }
    throw Error("no configured file for dataset '" + std::string(to_string(s)) + "'");
}

LabeledDataset parse_source(const ExperimentConfig& cfg, DatasetSource s, const AttackMap& map) {
    const auto& path = source_path(cfg, s);
    if (!std::filesystem::exists(path)) throw Error("dataset file not found: " + path.string());
    return parse_nslkdd(path, map, {s, cfg.skip_first_row});
}

LabeledDataset subsample(const ExperimentConfig& cfg, LabeledDataset d) {
    if (!cfg.fast.enabled()) return d;
    std::vector<std::uint32_t> strata;
    for (auto c : d.categories) strata.push_back(static_cast<std::uint32_t>(index_of(c)));
    const auto keep = stratified_subsample(strata, cfg.fast.fraction, cfg.fast.min_per_category,
                                           mix_seed(cfg.require_seed(), 0xfa57 + static_cast<std::uint64_t>(d.source)));
    LabeledDataset out;
    out.source = d.source;
    for (auto i : keep) {
        out.records.push_back(std::move(d.records[i]));
        out.categories.push_back(d.categories[i]);
    }
    return out;
}

class StageTimer {
public:
    explicit StageTimer(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    const std::string& name() const { return name_; }

private:
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

template <typename F>
auto run_stage(const std::string& name, std::vector<std::pair<std::string, double>>& times, F&& f) {
    StageTimer t(name);
    try {
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            times.emplace_back(name, t.seconds());
        } else {
            auto r = f();
            times.emplace_back(name, t.seconds());
            return r;
        }
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

PreprocessState build_preprocess(const ExperimentConfig& cfg, const LabeledDataset& train, const AttackMap& map) {
    std::vector<LabeledDataset> tests;
    for (auto s : {DatasetSource::TestPlus, DatasetSource::Test21})
        if (std::filesystem::exists(source_path(cfg, s))) tests.push_back(parse_source(cfg, s, map));
    const LabeledDataset full_train = cfg.fast.enabled() ? parse_source(cfg, DatasetSource::Train, map) : LabeledDataset{};
    std::vector<const LabeledDataset*> sources{cfg.fast.enabled() ? &full_train : &train};
    for (const auto& t : tests) sources.push_back(&t);
    return fit_preprocess(train, sources);
}

DetectorArtifact load_detector(const ArtifactLayout& layout, AttackCategory c, const ExperimentConfig& cfg) {
    const auto path = layout.detector(c);
    if (!std::filesystem::exists(path))
        throw Error("detector artifact " + path.string() + " is missing; train the detectors first (train --scope " +
                    std::string(detector_id(c)) + " or --scope all)");
    const auto box = load_container(path, ArtifactKind::Detector);
    if (box.config_digest != cfg.digest())
        throw Error(path.string() + " was trained with config " + hex64(box.config_digest) + ", current config is " +
                    hex64(cfg.digest()) + "; retrain it");
    auto a = deserialize_detector(box.payload);
    if (a.spec.category != c) throw FormatError(path.string() + ": holds a detector for another category");
    return a;
}

MetaArtifact load_meta(const ArtifactLayout& layout, const ExperimentConfig& cfg) {
    if (!std::filesystem::exists(layout.meta()))
        throw Error("meta artifact " + layout.meta().string() + " is missing; run train --scope meta first");
    const auto box = load_container(layout.meta(), ArtifactKind::Meta);
    if (box.config_digest != cfg.digest())
        throw Error(layout.meta().string() + " was trained with config " + hex64(box.config_digest) +
                    ", current config is " + hex64(cfg.digest()) + "; retrain it");
    return deserialize_meta(box.payload);
}

PreprocessState load_state(const ArtifactLayout& layout) {
    if (!std::filesystem::exists(layout.sidecar()))
        throw Error("preprocessing sidecar " + layout.sidecar().string() + " is missing; run train first");
    return load_sidecar(layout.sidecar());
}

std::vector<AttackCategory> scope_detectors(TrainScope s) {
    switch (s) {
        case TrainScope::Dos: return {AttackCategory::DoS};
        case TrainScope::Probe: return {AttackCategory::Probe};
        case TrainScope::R2l: return {AttackCategory::R2L};
        case TrainScope::U2r: return {AttackCategory::U2R};
        case TrainScope::Meta: return {};
        case TrainScope::All: return {kAttackCategories.begin(), kAttackCategories.end()};
    }
    return {};
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

LabeledDataset load_dataset(const ExperimentConfig& cfg, DatasetSource source) {
    return subsample(cfg, parse_source(cfg, source, cfg.attack_map()));
}

bool cmd_ingest(const ExperimentConfig& cfg, std::ostream& out) {
    const auto map = cfg.attack_map();
    bool ok = true;
    for (auto s : {DatasetSource::Train, DatasetSource::TestPlus, DatasetSource::Test21}) {
        const auto d = parse_source(cfg, s, map);
        const auto dist = class_distribution(d);
        out << format_distribution(dist, std::string(to_string(s)) + " (" + source_path(cfg, s).filename().string() + ")");
        const auto check = check_distribution(dist, s);
        for (const auto& n : check.notes) out << "note: " << n << "\n";
        for (const auto& m : check.mismatches) out << "MISMATCH: " << m << "\n";
        out << (check.ok ? "distribution matches the published counts\n\n" : "distribution check FAILED\n\n");
        ok = ok && check.ok;
    }
    return ok;
}

PreprocessState cmd_preprocess(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.validate();
    const ArtifactLayout layout{cfg.paths.artifacts};
    const auto train = load_dataset(cfg, DatasetSource::Train);
    auto state = build_preprocess(cfg, train, cfg.attack_map());
    save_sidecar(layout.sidecar(), state);
    out << "wrote " << layout.sidecar().string() << ": " << state.column_names.size() << " columns, schema "
        << hex64(state.schema()) << "\n";
    return state;
}

void cmd_train(const ExperimentConfig& cfg, TrainScope scope, std::ostream& out) {
    cfg.validate();
    const ArtifactLayout layout{cfg.paths.artifacts};
    std::filesystem::create_directories(layout.root);
    std::vector<std::pair<std::string, double>> times;
    const auto config_digest = cfg.digest();
    const auto map = cfg.attack_map();

    const auto train = run_stage("load", times, [&] { return load_dataset(cfg, DatasetSource::Train); });
    const auto state = run_stage("preprocess", times, [&] {
        auto s = build_preprocess(cfg, train, map);
        if (scope == TrainScope::Meta && std::filesystem::exists(layout.sidecar()) &&
            format_sidecar(load_sidecar(layout.sidecar())) != format_sidecar(s))
            throw Error("existing sidecar differs from the current data/config; retrain the detectors");
        save_sidecar(layout.sidecar(), s);
        return s;
    });
    const auto x = state.transform(train);
    out << "training rows: " << x.rows << ", encoded columns: " << x.cols << (cfg.fast.enabled() ? " (fast mode)" : "")
        << "\n";

    for (auto c : scope_detectors(scope)) {
        const std::string stage = "detector." + std::string(detector_id(c));
        run_stage(stage, times, [&] {
            const auto a = train_detector(cfg.effective_detector(c), x, train.categories, state.schema(), config_digest);
            save_container(layout.detector(c), {ArtifactKind::Detector, config_digest, serialize_detector(a)});
            out << stage << ": epochs " << a.history.size() << " (best " << a.best_epoch << "), threshold "
                << format_double(a.threshold.threshold) << ", validation F1 " << fixed(a.threshold.f1_at_threshold)
                << "\n";
            for (const auto& w : a.warnings) out << stage << ": warning: " << w << "\n";
        });
    }

    if (scope == TrainScope::Meta || scope == TrainScope::All) {
        std::vector<DetectorArtifact> dets;
        run_stage("meta.load_detectors", times, [&] {
            for (auto c : kAttackCategories) {
                dets.push_back(load_detector(layout, c, cfg));
                if (dets.back().schema_digest != state.schema())
                    throw Error(layout.detector(c).string() + " was trained on a different feature schema");
            }
        });
        const auto oof = run_stage("meta.out_of_fold", times, [&] {
            std::vector<DetectorSpec> specs;
            for (auto c : kAttackCategories) specs.push_back(cfg.effective_detector(c));
            auto r = out_of_fold_features(specs, x, train.categories, cfg.meta.folds, mix_seed(cfg.require_seed(), 0xf01d5),
                                          state.schema(), config_digest);
            const auto issues = audit_out_of_fold(r);
            if (!issues.empty()) throw Error("out-of-fold audit failed: " + issues.front());
            return r;
        });
        run_stage("meta.forest", times, [&] {
            std::vector<const DetectorArtifact*> ptrs;
            for (const auto& d : dets) ptrs.push_back(&d);
            const auto meta = train_meta(ptrs, oof.features, anomaly_labels(train.categories), cfg.effective_meta_forest(),
                                         cfg.meta.folds, config_digest);
            save_container(layout.meta(), {ArtifactKind::Meta, config_digest, serialize_meta(meta)});
            out << "meta: " << cfg.meta.folds << "-fold out-of-fold features, training accuracy "
                << fixed(meta.training_accuracy) << "\n";
        });
    }

    std::string manifest = "config_digest = " + hex64(config_digest) + "\nseed = " + std::to_string(cfg.require_seed()) +
                           "\nfast.fraction = " + format_double(cfg.fast.fraction) + "\n";
    for (const auto& [stage, secs] : times) manifest += "stage." + stage + ".seconds = " + fixed(secs, 3) + "\n";
    write_file_atomic(layout.manifest(), manifest);
}

EvaluationOutput cmd_evaluate(const ExperimentConfig& cfg, DatasetSource dataset, std::string_view target,
                              std::ostream& out) {
    if (dataset != DatasetSource::TestPlus && dataset != DatasetSource::Test21)
        throw Error("evaluate: dataset must be test_plus or test_21");
    const ArtifactLayout layout{cfg.paths.artifacts};
    const auto state = load_state(layout);
    const auto data = load_dataset(cfg, dataset);
    const auto x = state.transform(data);
    const std::string dataset_id(to_string(dataset));
    EvaluationOutput result;

    if (target == "meta") {
        std::vector<DetectorArtifact> dets;
        for (auto c : kAttackCategories) dets.push_back(load_detector(layout, c, cfg));
        std::vector<const DetectorArtifact*> ptrs;
        for (const auto& d : dets) ptrs.push_back(&d);
        const auto meta = load_meta(layout, cfg);
        const auto pred = predict_anomaly(meta, ptrs, x);
        result.report = evaluate(pred.probability, anomaly_labels(data.categories), 0.5, "meta", dataset_id,
                                 digest(serialize_meta(meta)));
        result.decisions = pred.decisions;
    } else {
        const auto cat = parse_detector_id(target);
        if (!cat) throw Error("evaluate: unknown target '" + std::string(target) + "' (dos, probe, r2l, u2r or meta)");
        const auto det = load_detector(layout, *cat, cfg);
        if (det.schema_digest != state.schema()) throw Error("evaluate: detector schema does not match the sidecar");
        const auto labels = binarize_labels(data, *cat);
        const auto scores = member_scores(det, x);
        const auto probs = det.has_members() ? combine_members(scores, det.spec.ensemble.weights) : scores.neural;
        result.report = evaluate(probs, labels, det.threshold.threshold, std::string(target), dataset_id,
                                 detector_digest(det));
        result.decisions = apply_threshold(probs, det.threshold.threshold);
        result.threshold = det.threshold;
        if (det.has_members())
            result.neural_only = evaluate(scores.neural, labels, 0.5, std::string(target) + ".neural", dataset_id,
                                          detector_digest(det));
    }

    std::string text = format_report_text(result.report);
    if (result.threshold) {
        const auto& t = *result.threshold;
        text += "validation threshold " + format_double(t.threshold) + ": recall " + fixed(t.recall_at_threshold) +
                " (at 0.5: " + fixed(t.recall_at_half) + "), F1 " + fixed(t.f1_at_threshold) + " (at 0.5: " +
                fixed(t.f1_at_half) + ")\n";
    }
    if (result.neural_only)
        text += "neural member alone at 0.5: recall " + fixed(result.neural_only->recall.value) + ", F1 " +
                fixed(result.neural_only->f1.value) + ", missed " + std::to_string(result.neural_only->confusion.fn) +
                " (ensemble missed " + std::to_string(result.report.confusion.fn) + ")\n";
    const double gap = result.report.recall.value - result.report.precision.value;
    if (gap > 0.05)
        text += "note: precision " + percent(result.report.precision.value) + " is below recall " +
                percent(result.report.recall.value) + " (rare-class trade-off)\n";
    out << text;

    const auto dir = layout.reports();
    std::filesystem::create_directories(dir);
    const std::string stem = std::string(target) + "_" + dataset_id;
    write_file_atomic(dir / (stem + ".txt"), text);
    write_file_atomic(dir / (stem + ".kv"), format_report_kv(result.report));
    write_file_atomic(dir / (stem + "_confusion.csv"), format_confusion_grid(result.report));
    write_file_atomic(dir / (stem + "_roc.csv"), format_roc_curve(result.report));
    if (result.neural_only) write_file_atomic(dir / (stem + "_neural.kv"), format_report_kv(*result.neural_only));
    return result;
}

int cmd_score(const ExperimentConfig& cfg, const std::filesystem::path& input, std::ostream& out, std::ostream& err) {
    if (!std::filesystem::exists(input)) throw Error("input file not found: " + input.string());
    const ArtifactLayout layout{cfg.paths.artifacts};
    const auto state = load_state(layout);
    std::vector<DetectorArtifact> dets;
    for (auto c : kAttackCategories) dets.push_back(load_detector(layout, c, cfg));
    std::vector<const DetectorArtifact*> ptrs;
    for (const auto& d : dets) ptrs.push_back(&d);
    const auto meta = load_meta(layout, cfg);

    const auto text = read_file(input);
    std::vector<RawRecord> records;
    std::vector<std::size_t> row_ids;
    std::size_t bad = 0, row = 0;
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto nl = rest.find('\n');
        const auto line = rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        if (line.empty() || line == "\r") continue;
        const auto fields = split_fields(line);
        try {
            if (fields.size() < kFeatureCount || fields.size() > kRowFieldCount)
                throw Error("expected 41 to 43 fields, got " + std::to_string(fields.size()));
            records.push_back(parse_features(std::span(fields).first(kFeatureCount), input.string(), row + 1));
            row_ids.push_back(row);
        } catch (const Error& e) {
            err << "row " << row << ": " << e.what() << "\n";
            ++bad;
        }
        ++row;
    }
    if (!records.empty()) {
        const auto pred = predict_anomaly(meta, ptrs, state.transform(records));
        out << kVerdictHeader << "\n";
        for (std::size_t i = 0; i < records.size(); ++i) {
            out << row_ids[i];
            for (std::size_t j = 0; j < 4; ++j) out << "," << format_double(pred.features.at(i, j));
            out << "," << format_double(pred.probability[i]) << "," << int(pred.decisions[i]) << "\n";
        }
    }
    if (bad) err << bad << " malformed row(s) skipped\n";
    return bad ? 1 : 0;
}

}  // namespace nids
