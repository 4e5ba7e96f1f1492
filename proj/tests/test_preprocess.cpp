#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nids/preprocess.hpp"
#include "synthetic_kdd.hpp"

using namespace nids;

namespace {

LabeledDataset corpus(testing::SyntheticCounts c, std::uint64_t seed, DatasetSource s = DatasetSource::Other) {
    return parse_nslkdd_text(testing::synthetic_corpus(c, seed), AttackMap::canonical(), {s});
}

}  // namespace

TEST_CASE("vocabulary is the sorted union of train and test values") {
    auto train = corpus({30, 20, 10, 5, 3}, 1);
    auto test = corpus({10, 10, 5, 5, 2}, 2);
    test.records[0].categorical[1] = "zz_only_in_test";
    const auto v = build_vocabulary(train, test);
    for (std::size_t f = 0; f < 3; ++f) {
        CHECK(std::is_sorted(v.values[f].begin(), v.values[f].end()));
        CHECK(std::adjacent_find(v.values[f].begin(), v.values[f].end()) == v.values[f].end());
        for (const auto* d : {&train, &test})
            for (const auto& r : d->records) CHECK(v.find(f, r.categorical[f]) != std::string::npos);
    }
    CHECK(v.values[1].back() == "zz_only_in_test");
    CHECK(v.find(0, "nonexistent") == std::string::npos);
}

TEST_CASE("one-hot encoding: identical columns across splits, one indicator per group") {
    auto train = corpus({60, 40, 20, 10, 5}, 3);
    auto test = corpus({20, 20, 10, 10, 5}, 4);
    const auto v = build_vocabulary(train, test);
    const auto a = one_hot_encode(train, v), b = one_hot_encode(test, v);
    CHECK(a.column_names == b.column_names);
    CHECK(a.cols == kNumericCount + v.width());
    CHECK(a.column_names[0] == "duration");
    CHECK(a.column_names[kNumericCount].rfind("protocol_type=", 0) == 0);
    for (const auto* m : {&a, &b}) {
        for (std::size_t r = 0; r < m->rows; ++r) {
            std::size_t off = kNumericCount;
            for (std::size_t f = 0; f < 3; ++f) {
                double sum = 0;
                for (std::size_t j = 0; j < v.values[f].size(); ++j) {
                    const double x = m->at(r, off + j);
                    CHECK((x == 0.0 || x == 1.0));
                    sum += x;
                }
                CHECK(sum == 1.0);
                off += v.values[f].size();
            }
        }
    }
    // The numeric block is copied verbatim.
    for (std::size_t j = 0; j < kNumericCount; ++j) CHECK(a.at(7, j) == train.records[7].numeric[j]);

    CategoryVocabulary train_only = build_vocabulary(train, train);
    test.records[0].categorical[2] = "NEWFLAG";
    CHECK_THROWS_WITH_AS(one_hot_encode(test, train_only), doctest::Contains("NEWFLAG"), Error);
}

TEST_CASE("scaler matches a two-pass mean and population deviation") {
    Rng rng(5);
    FeatureMatrix m(300, 6);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = c == 2 ? 7.0 : 1e4 * (c + 1) + rng.normal() * (c + 1);
    const auto p = fit_scaler(m);
    for (std::size_t c = 0; c < m.cols; ++c) {
        double mean = 0;
        for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, c);
        mean /= double(m.rows);
        double ss = 0;
        for (std::size_t r = 0; r < m.rows; ++r) ss += (m.at(r, c) - mean) * (m.at(r, c) - mean);
        const double sd = std::sqrt(ss / double(m.rows));
        CHECK(p.mean[c] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(p.stddev[c] == doctest::Approx(sd).epsilon(1e-9));
    }
    CHECK(p.stddev[2] == 0.0);

    const auto z = apply_scaler(m, p);
    const auto back = invert_scaler(z, p);
    const auto zp = fit_scaler(z);
    for (std::size_t c = 0; c < m.cols; ++c) {
        CHECK(zp.mean[c] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        CHECK(zp.stddev[c] == doctest::Approx(c == 2 ? 0.0 : 1.0).epsilon(1e-9));
        for (std::size_t r = 0; r < m.rows; ++r) {
            if (c == 2) CHECK(z.at(r, c) == 0.0);
            CHECK(back.at(r, c) == doctest::Approx(m.at(r, c)).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(apply_scaler(FeatureMatrix(2, 5), p), ShapeError);
    CHECK_THROWS(fit_scaler(FeatureMatrix(1, 3)));
}

TEST_CASE("fit_preprocess scales on train only and the sidecar round-trips exactly") {
    const auto train = corpus({60, 40, 20, 10, 5}, 6, DatasetSource::Train);
    const auto test = corpus({20, 20, 10, 10, 5}, 7, DatasetSource::TestPlus);
    const std::array<const LabeledDataset*, 2> sources{&train, &test};
    const auto s = fit_preprocess(train, sources);
    CHECK(s.scaler.fitted_on == "train");
    const auto direct = fit_scaler(one_hot_encode(train, s.vocab));
    CHECK(direct.mean == s.scaler.mean);
    CHECK(direct.stddev == s.scaler.stddev);

    const auto text = format_sidecar(s);
    const auto back = parse_sidecar(text);
    CHECK(back.column_names == s.column_names);
    CHECK(back.vocab.values == s.vocab.values);
    CHECK(back.scaler.mean == s.scaler.mean);
    CHECK(back.scaler.stddev == s.scaler.stddev);
    CHECK(format_sidecar(back) == text);
    CHECK(back.transform(test).values == s.transform(test).values);

    const auto dir = std::filesystem::temp_directory_path() / "nids_test_sidecar";
    std::filesystem::create_directories(dir);
    save_sidecar(dir / "p.txt", s);
    CHECK(format_sidecar(load_sidecar(dir / "p.txt")) == text);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sidecar rejects damage") {
    const auto train = corpus({30, 20, 10, 5, 3}, 8, DatasetSource::Train);
    const std::array<const LabeledDataset*, 1> sources{&train};
    const auto text = format_sidecar(fit_preprocess(train, sources));
    auto replaced = [&](std::string_view from, std::string_view to) {
        auto t = text;
        const auto pos = t.find(from);
        REQUIRE(pos != std::string::npos);
        t.replace(pos, from.size(), to);
        return t;
    };
    CHECK_THROWS(parse_sidecar(replaced("version = 1", "version = 9")));
    CHECK_THROWS(parse_sidecar(text.substr(0, text.size() / 2)));
    CHECK_THROWS(parse_sidecar(text + "unexpected = 1\n"));
}

TEST_CASE("schema digest depends on column order") {
    std::vector<std::string> a{"x", "y", "z"}, b{"x", "z", "y"};
    CHECK(schema_digest(a) != schema_digest(b));
    CHECK(schema_digest(a) == schema_digest(std::vector<std::string>{"x", "y", "z"}));
}
