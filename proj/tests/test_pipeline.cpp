#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "nids/artifact.hpp"
#include "nids/pipeline.hpp"
#include "synthetic_kdd.hpp"

using namespace nids;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("nids_pipeline_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const fs::path& data_dir() {
    static const fs::path dir = [] {
        const auto d = scratch("data");
        write_file_atomic(d / "KDDTrain+.txt", testing::synthetic_corpus({500, 350, 120, 60, 30}, 1));
        write_file_atomic(d / "KDDTest+.txt", testing::synthetic_corpus({150, 120, 50, 40, 15}, 2));
        write_file_atomic(d / "KDDTest-21.txt", testing::synthetic_corpus({60, 80, 50, 40, 15}, 3));
        return d;
    }();
    return dir;
}

ExperimentConfig config_for(const fs::path& artifacts) {
    const auto text = "seed = 11\nfast.fraction = 1\nfast.max_epochs = 2\nfast.max_trees = 8\nmeta.folds = 3\n"
                      "paths.train = KDDTrain+.txt\npaths.test_plus = KDDTest+.txt\npaths.test_21 = KDDTest-21.txt\n"
                      "paths.artifacts = " +
                      artifacts.string() + "\n";
    return ExperimentConfig::parse(text, data_dir());
}

std::string slurp(const fs::path& p) { return read_file(p); }

struct Trained {
    fs::path root;
    ExperimentConfig cfg;
};

const Trained& trained() {
    static const Trained t = [] {
        const auto root = scratch("a");
        auto cfg = config_for(root);
        std::ostringstream log;
        cmd_train(cfg, TrainScope::All, log);
        return Trained{root, cfg};
    }();
    return t;
}

}  // namespace

TEST_CASE("meta scope refuses to run before the detectors exist") {
    const auto root = scratch("empty");
    std::ostringstream log;
    try {
        cmd_train(config_for(root), TrainScope::Meta, log);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "meta.load_detectors");
        CHECK(std::string(e.what()).find("train the detectors first") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(ArtifactLayout{root}.meta()));
}

TEST_CASE("same seed, two runs: identical artifacts and reports") {
    const auto& a = trained();
    const auto root_b = scratch("b");
    const auto cfg_b = config_for(root_b);
    std::ostringstream log;
    cmd_train(cfg_b, TrainScope::All, log);
    const ArtifactLayout la{a.root}, lb{root_b};
    CHECK(slurp(la.sidecar()) == slurp(lb.sidecar()));
    CHECK(slurp(la.meta()) == slurp(lb.meta()));
    for (auto c : kAttackCategories) CHECK(slurp(la.detector(c)) == slurp(lb.detector(c)));

    std::ostringstream out_a, out_b;
    cmd_evaluate(a.cfg, DatasetSource::TestPlus, "meta", out_a);
    cmd_evaluate(cfg_b, DatasetSource::TestPlus, "meta", out_b);
    CHECK(out_a.str() == out_b.str());
    for (const auto* f : {"meta_test_plus.kv", "meta_test_plus.txt", "meta_test_plus_confusion.csv", "meta_test_plus_roc.csv"})
        CHECK(slurp(la.reports() / f) == slurp(lb.reports() / f));

    const auto manifest = slurp(la.manifest());
    CHECK(manifest.find("config_digest = " + hex64(a.cfg.digest())) != std::string::npos);
    CHECK(manifest.find("stage.meta.out_of_fold.seconds") != std::string::npos);
    CHECK(load_container(la.meta(), ArtifactKind::Meta).config_digest == a.cfg.digest());
}

TEST_CASE("detector evaluation reports threshold and members") {
    const auto& t = trained();
    std::ostringstream out;
    const auto r = cmd_evaluate(t.cfg, DatasetSource::TestPlus, "probe", out);
    CHECK(r.neural_only.has_value());
    REQUIRE(r.threshold.has_value());
    CHECK(r.report.threshold == r.threshold->threshold);
    CHECK(r.report.roc_defined);
    CHECK(r.report.confusion.positives() == 50);
    CHECK(fs::exists(ArtifactLayout{t.root}.reports() / "probe_test_plus_neural.kv"));
    CHECK_THROWS_WITH(cmd_evaluate(t.cfg, DatasetSource::TestPlus, "worm", out), doctest::Contains("unknown target"));
}

TEST_CASE("score agrees with evaluate and tolerates bad rows") {
    const auto& t = trained();
    std::ostringstream eval_out;
    const auto ev = cmd_evaluate(t.cfg, DatasetSource::TestPlus, "meta", eval_out);

    std::ostringstream out, err;
    CHECK(cmd_score(t.cfg, data_dir() / "KDDTest+.txt", out, err) == 0);
    std::istringstream lines(out.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == kVerdictHeader);
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        const auto fields = split_fields(line);
        REQUIRE(fields.size() == 7);
        CHECK(parse_double_exact(fields[0]) == static_cast<double>(n));
        for (std::size_t j = 1; j <= 5; ++j) {
            const double p = parse_double_exact(fields[j]);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
        CHECK(fields[6] == (ev.decisions[n] ? "1" : "0"));
        ++n;
    }
    CHECK(n == ev.decisions.size());

    const auto dir = scratch("score");
    write_file_atomic(dir / "empty.txt", "");
    std::ostringstream e_out, e_err;
    CHECK(cmd_score(t.cfg, dir / "empty.txt", e_out, e_err) == 0);
    CHECK(e_out.str().empty());

    const auto test = slurp(data_dir() / "KDDTest+.txt");
    const auto first = test.substr(0, test.find('\n'));
    write_file_atomic(dir / "mixed.txt", first + "\n1,2,3\n" + first + "\n");
    std::ostringstream m_out, m_err;
    CHECK(cmd_score(t.cfg, dir / "mixed.txt", m_out, m_err) == 1);
    CHECK(m_err.str().find("row 1:") != std::string::npos);
    const auto mixed = m_out.str();
    CHECK(std::count(mixed.begin(), mixed.end(), '\n') == 3);
}

TEST_CASE("stale or damaged artifacts are refused") {
    const auto& t = trained();
    auto other = t.cfg;
    other.detectors[0].train.learning_rate = 5e-4;
    std::ostringstream out;
    CHECK_THROWS_WITH(cmd_evaluate(other, DatasetSource::TestPlus, "dos", out), doctest::Contains("retrain"));

    const auto root = scratch("damaged");
    fs::copy(t.root, root, fs::copy_options::recursive);
    auto cfg = t.cfg;
    cfg.paths.artifacts = root;
    auto bytes = slurp(ArtifactLayout{root}.detector(AttackCategory::U2R));
    bytes[bytes.size() / 2] ^= 0x40;
    write_file_atomic(ArtifactLayout{root}.detector(AttackCategory::U2R), bytes);
    CHECK_THROWS_WITH(cmd_evaluate(cfg, DatasetSource::TestPlus, "u2r", out), doctest::Contains("checksum"));
}

TEST_CASE("missing data files are named") {
    auto cfg = config_for(scratch("missing"));
    cfg.paths.train = data_dir() / "nope.txt";
    std::ostringstream out;
    CHECK_THROWS_WITH(cmd_ingest(cfg, out), doctest::Contains("nope.txt"));
    CHECK_THROWS_WITH(cmd_train(cfg, TrainScope::Dos, out), doctest::Contains("stage load: dataset file not found"));
}
