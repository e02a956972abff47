#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oslnet/commands.hpp"

using namespace oslnet;

int main(int argc, char** argv) {
    CLI::App app{"Orthogonal softmax layer training lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config,-c", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out,-o", out_dir, "Output directory, overrides the config");
        cmd->add_option("--workers,-j", workers, "Parallel rounds, overrides the config");
        cmd->add_option("--seed", seed, "Base training seed for every arm");
    };

    auto* train = app.add_subcommand("train", "Run every arm for the configured rounds");
    add_run_flags(train);

    auto* sweep = app.add_subcommand("sweep", "Run every arm across width, depth or reduction values");
    add_run_flags(sweep);
    std::optional<std::string> axis;
    std::vector<std::string> values;
    sweep->add_option("--axis", axis, "width, depth or reduction")
        ->check(CLI::IsMember({"width", "depth", "reduction"}));
    sweep->add_option("--values", values, "Values for the axis, e.g. 16 32 64 or 32-8 64-32-8");

    auto* compare = app.add_subcommand("compare", "Paired t-test on test accuracy of two result sets");
    CompareOptions cmp;
    std::string results_a;
    std::optional<std::string> results_b;
    compare->add_option("results_a", results_a, "results.jsonl")->required()->check(CLI::ExistingFile);
    compare->add_option("results_b", results_b, "second results.jsonl, defaults to the first")
        ->check(CLI::ExistingFile);
    compare->add_option("--arm-a", cmp.arm_a, "Arm to take from the first file");
    compare->add_option("--arm-b", cmp.arm_b, "Arm to take from the second file");

    auto* verify = app.add_subcommand("verify", "Monte-Carlo check of the spectral norm bounds");
    VerifyOptions vo;
    std::string verify_out = "out";
    verify->add_option("--d", vo.d, "Last hidden width")->check(CLI::PositiveNumber);
    verify->add_option("--k", vo.k, "Class count")->check(CLI::PositiveNumber);
    verify->add_option("--bound", vo.bound, "Entry bound B")->check(CLI::PositiveNumber);
    verify->add_option("--trials", vo.trials, "Random matrices")->check(CLI::PositiveNumber);
    verify->add_option("--seed", vo.seed);
    verify->add_option("--out,-o", verify_out, "Output directory");

    auto* gen = app.add_subcommand("gen-data", "Write a synthetic blob dataset as CSV");
    BlobParams bp;
    std::string csv_out;
    gen->add_option("--out,-o", csv_out, "CSV file")->required();
    gen->add_option("--classes", bp.classes)->check(CLI::Range(2, 1 << 20));
    gen->add_option("--dim", bp.dim)->check(CLI::PositiveNumber);
    gen->add_option("--train-per-class", bp.train_per_class)->check(CLI::PositiveNumber);
    gen->add_option("--test-per-class", bp.test_per_class);
    gen->add_option("--noise", bp.noise_scale)->check(CLI::NonNegativeNumber);
    gen->add_option("--min-angle", bp.min_angle_deg)->check(CLI::Range(0.0, 90.0));
    gen->add_option("--seed", bp.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    ConfigOverrides overrides;
    if (out_dir) overrides.output = *out_dir;
    overrides.workers = workers;
    overrides.seed = seed;

    if (*train) return cmd_train(config_path, overrides, std::cout, std::cerr);
    if (*sweep) return cmd_sweep(config_path, axis, values, overrides, std::cout, std::cerr);
    if (*compare) {
        cmp.results_a = results_a;
        if (results_b) cmp.results_b = *results_b;
        return cmd_compare(cmp, std::cout, std::cerr);
    }
    if (*verify) {
        vo.output = verify_out;
        return cmd_verify(vo, std::cout, std::cerr);
    }
    return cmd_gen_data(bp, csv_out, std::cout, std::cerr);
}
