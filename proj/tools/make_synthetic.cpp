// Writes a synthetic corpus in NSL-KDD format (train, test_plus, test_21)
// with the published class proportions, for trying the pipeline without the
// real data.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>

#include "nids/common.hpp"
#include "synthetic_kdd.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic NSL-KDD-format corpus"};
    std::string dir = "data";
    double scale = 1.0;
    std::uint64_t seed = 1;
    app.add_option("--out", dir, "output directory");
    app.add_option("--scale", scale, "fraction of the published file sizes")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    const auto n = [&](double v) { return static_cast<std::size_t>(std::max(1.0, std::round(v * scale))); };
    const nids::testing::SyntheticCounts train{n(67343), n(45927), n(11656), n(995), n(52)};
    const nids::testing::SyntheticCounts plus{n(9711), n(7460), n(2421), n(2752), n(200)};
    const nids::testing::SyntheticCounts hard{n(2152), n(4344), n(2402), n(2752), n(200)};
    try {
        const std::filesystem::path out(dir);
        nids::write_file_atomic(out / "KDDTrain+.txt", nids::testing::synthetic_corpus(train, seed));
        nids::write_file_atomic(out / "KDDTest+.txt", nids::testing::synthetic_corpus(plus, nids::mix_seed(seed, 1)));
        nids::write_file_atomic(out / "KDDTest-21.txt", nids::testing::synthetic_corpus(hard, nids::mix_seed(seed, 2)));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
