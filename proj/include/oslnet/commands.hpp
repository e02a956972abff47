#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oslnet/experiment.hpp"

namespace oslnet {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2, kExitDegenerate = 3 };

// Maps an exception to the documented exit code.
int exit_code_for(const std::exception& e);

struct ArmOutcome {
    ArmConfig arm;
    std::string hash;
    RoundsOutcome rounds;
};

struct ExperimentOutcome {
    std::vector<ArmOutcome> arms;
    std::vector<std::string> warnings;
};

// Builds the data once, validates every arm against it, then runs the arms
// in order. Each RunResult carries its arm's hash. `log` gets one progress
// line per arm when non-null.
ExperimentOutcome run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// Largest |90° − angle| and largest |w_i·w_j| over class pairs.
struct OrthogonalityCheck {
    std::vector<double> angles;  // upper triangle, degrees
    double max_angle_deviation = 0.0;
    double max_abs_dot = 0.0;
};
OrthogonalityCheck check_orthogonality(const Matrix& classifier_weights);

int cmd_train(const std::filesystem::path& config_path, const ConfigOverrides& overrides, std::ostream& out,
              std::ostream& err);

struct CompareOptions {
    std::filesystem::path results_a;
    std::optional<std::filesystem::path> results_b;  // defaults to results_a
    std::optional<std::string> arm_a;
    std::optional<std::string> arm_b;
};
// Pairs records by round and requires equal seeds.
TTestReport compare_results(std::vector<RunResult> a, std::vector<RunResult> b);
int cmd_compare(const CompareOptions& options, std::ostream& out, std::ostream& err);

struct SweepRow {
    std::string value;
    std::string arm;
    std::optional<Summary> summary;
    std::string note;
};
// Axis and values from the arguments override the config's sweep section.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& axis,
                                const std::vector<std::string>& values, std::vector<RunResult>* results = nullptr,
                                std::ostream* log = nullptr);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
int cmd_sweep(const std::filesystem::path& config_path, const std::optional<std::string>& axis,
              const std::vector<std::string>& values, const ConfigOverrides& overrides, std::ostream& out,
              std::ostream& err);

struct VerifyOptions {
    std::size_t d = 32;
    std::size_t k = 8;
    double bound = 1.0;
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    std::filesystem::path output = "out";
};
int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);

int cmd_gen_data(const BlobParams& params, const std::filesystem::path& csv_path, std::ostream& out,
                 std::ostream& err);

}  // namespace oslnet
