// sud: generate synthetic noisy data, train, compare selection strategies,
// and emit figure tables from a run directory.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 bad config or arguments,
// 3 I/O failure, 4 training diverged, 5 run lacks selection.csv.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sud/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Softly update-drop training on synthetic noisy fine-grained data"};
    app.require_subcommand(1);

    std::string config, out;
    std::uint64_t seed = 0;
    bool per_sample_log = false;
    auto* config_opt = app.add_option("--config", config, "JSON experiment config")->check(CLI::ExistingFile);
    auto* out_opt = app.add_option("--out", out, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "overrides every seed in the config");
    app.add_flag("--per-sample-log", per_sample_log, "also write selection.csv");

    auto* gen = app.add_subcommand("generate", "write train/validation/test CSVs and dataset_spec.json");
    auto* train = app.add_subcommand("train", "train one strategy");
    auto* compare = app.add_subcommand("compare", "train every listed strategy on the same data");
    auto* report = app.add_subcommand("report", "figure tables from a run directory");
    std::string run_dir;
    report->add_option("run_dir", run_dir, "directory written by train")->required()->check(CLI::ExistingDirectory);
    for (auto* sub : {gen, train, compare, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return sud::kExitConfig;
    }

    sud::CommandOptions opts;
    if (*config_opt) opts.config = config;
    if (*seed_opt) opts.seed = seed;
    opts.per_sample_log = per_sample_log;
    if (*out_opt)
        opts.out = out;
    else if (*report)
        opts.out.clear();
    opts.run_dir = run_dir;

    try {
        sud::CommandOutput result;
        if (*gen)
            result = sud::cmd_generate(opts);
        else if (*train)
            result = sud::cmd_train(opts);
        else if (*compare)
            result = sud::cmd_compare(opts);
        else
            result = sud::cmd_report(opts);
        std::cerr << result.summary;
        std::cout << result.manifest.generic_string() << '\n';
        return sud::kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "sud: " << e.what() << '\n';
        return sud::exit_code_for(e);
    }
}
