#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "nids/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Intrusion detection: four attack-specialized detectors fused by a meta-classifier"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> fast;
    app.add_option("--config", config_path, "experiment config file (key = value)");
    app.add_option("--seed", seed, "global RNG seed (overrides the config)");
    app.add_option("--fast", fast, "train and evaluate on a stratified subsample of this fraction")
        ->check(CLI::Range(0.0, 1.0));

    auto* ingest = app.add_subcommand("ingest", "parse the data files and check class distributions");
    auto* preprocess = app.add_subcommand("preprocess", "fit the encoder and scaler, write the sidecar");

    auto* train = app.add_subcommand("train", "train detectors and/or the meta-classifier");
    std::string scope = "all";
    train->add_option("--scope", scope, "dos, probe, r2l, u2r, meta or all")
        ->check(CLI::IsMember({"dos", "probe", "r2l", "u2r", "meta", "all"}));

    auto* evaluate = app.add_subcommand("evaluate", "evaluate a detector or the meta-classifier on a test file");
    std::string dataset, target;
    evaluate->add_option("--dataset", dataset, "test_plus or test_21")
        ->required()
        ->check(CLI::IsMember({"test_plus", "test_21"}));
    evaluate->add_option("--target", target, "dos, probe, r2l, u2r or meta")
        ->required()
        ->check(CLI::IsMember({"dos", "probe", "r2l", "u2r", "meta"}));

    auto* score = app.add_subcommand("score", "emit a verdict line per input row");
    std::string input;
    score->add_option("--input", input, "rows in NSL-KDD feature format")->required();

    auto* show = app.add_subcommand("config", "print the effective configuration and its digest");
    bool defaults = false;
    show->add_flag("--defaults", defaults, "print a complete default config file instead");

    CLI11_PARSE(app, argc, argv);

    try {
        if (show->parsed() && defaults) {
            std::cout << nids::default_config_text();
            return 0;
        }
        auto cfg = config_path.empty()
                       ? nids::ExperimentConfig::parse("", std::filesystem::current_path(), "<defaults>")
                       : nids::ExperimentConfig::load(config_path);
        if (seed) cfg.seed = *seed;
        if (fast) cfg.fast.fraction = *fast;

        if (show->parsed()) {
            std::cout << cfg.effective_text() << "# digest " << nids::hex64(cfg.digest()) << "\n";
            return 0;
        }
        if (ingest->parsed()) return nids::cmd_ingest(cfg, std::cout) ? 0 : 1;
        if (preprocess->parsed()) {
            nids::cmd_preprocess(cfg, std::cout);
            return 0;
        }
        if (train->parsed()) {
            nids::cmd_train(cfg, *nids::parse_train_scope(scope), std::cout);
            return 0;
        }
        if (evaluate->parsed()) {
            nids::cmd_evaluate(cfg, *nids::parse_dataset_source(dataset), target, std::cout);
            return 0;
        }
        if (score->parsed()) return nids::cmd_score(cfg, input, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
