#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "oslnet/serialize.hpp"
#include "oslnet/training.hpp"

namespace oslnet {

struct DataConfig {
    std::optional<BlobParams> generator;
    std::optional<std::filesystem::path> file;
    RoundData per_round = RoundData::resplit;
    double train_fraction = 0.5;
    std::size_t reduce_per_class = 0;
    std::uint64_t seed = 0;
};

// One named model/training variant after merging its patch onto the base.
// input_dim and class_count stay 0 until bound to a dataset.
struct ArmConfig {
    std::string name;
    ModelSpec model;
    TrainConfig train;
    Json resolved;  // merged model and train sections
};

struct SweepConfig {
    std::string axis;  // width, depth or reduction
    std::vector<std::string> values;
};

struct ExperimentConfig {
    DataConfig data;
    std::size_t rounds = 20;
    std::size_t workers = 1;
    std::filesystem::path output = "out";
    std::vector<ArmConfig> arms;
    std::optional<SweepConfig> sweep;
    // Canonical form of every field that affects results (not output or
    // workers) and its FNV-1a hash.
    Json canonical;
    std::string hash;

    // Hash of the data section, rounds and one arm's resolved settings.
    std::string arm_hash(const ArmConfig& arm) const;
};

struct ConfigOverrides {
    std::optional<std::filesystem::path> output;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;  // replaces train.seed in every arm
};

// Strict: unknown keys, wrong types and out-of-range values raise
// ConfigError naming the offending field. Relative data paths resolve
// against `base_dir`.
ExperimentConfig parse_experiment(const Json& doc, const std::filesystem::path& base_dir = {},
                                  const ConfigOverrides& overrides = {});
ExperimentConfig load_experiment(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

ModelSpec parse_model(const Json& j);
TrainConfig parse_train(const Json& j);
LossKind parse_loss(const Json& j);
BlobParams parse_blob_params(const Json& j);

// Loads the feature file, if any; empty-class warnings go to `warnings`.
DataRecipe make_recipe(const DataConfig& data, std::vector<std::string>* warnings = nullptr);
// Copies input_dim and class_count from the dataset and validates the arm.
void bind_to_data(ArmConfig& arm, const Dataset& data);

std::string classifier_name(ClassifierKind kind);
std::string round_data_name(RoundData mode);

}  // namespace oslnet
