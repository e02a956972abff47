#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "oslnet/data.hpp"
#include "oslnet/layers.hpp"
#include "oslnet/losses.hpp"
#include "oslnet/optim.hpp"

namespace oslnet {

enum class ClassifierKind { fc, osl };

struct ModelSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_widths{32};
    std::size_t class_count = 0;
    ClassifierKind classifier = ClassifierKind::fc;
    std::optional<double> hidden_dropout;
    std::optional<double> hidden_dropconnect;
    LossKind loss = CrossEntropyLoss{};
    bool classifier_bias = false;
    bool hidden_bias = true;

    void validate() const;
};

enum class ScheduleKind { constant, cosine };
enum class Granularity { epoch, iteration };

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    OptimizerConfig optimizer;
    ScheduleKind schedule = ScheduleKind::constant;
    Granularity granularity = Granularity::epoch;
    std::uint64_t seed = 0;
    // > 0 enables snapshot ensembling with this many cosine cycles.
    std::size_t snapshot_count = 0;

    void validate() const;
};

inline constexpr double kDivergenceThreshold = 1e6;

// Hidden ReLU stack followed by a dense or orthogonal softmax classifier.
class Network {
public:
    struct HiddenBlock {
        std::variant<DenseLayer, DropConnectLayer> layer;
        std::optional<DropoutLayer> dropout;
    };

    Network(const ModelSpec& spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    void set_mode(Mode mode);

    // Class probabilities in evaluation mode, one column per sample.
    Matrix predict(const Matrix& inputs) const;
    // Input to the classification layer in evaluation mode.
    Matrix features(const Matrix& inputs) const;

    bool has_osl() const { return osl_.has_value(); }
    const OslLayer& osl() const { return *osl_; }
    const DenseLayer& fc() const { return *fc_; }
    // Classification weights with the mask applied, one column per class.
    Matrix classifier_weights() const;
    const std::vector<HiddenBlock>& hidden() const { return hidden_; }

    // Parameters in a fixed order: per hidden block weights then bias, then
    // the classifier weights and bias.
    std::vector<Matrix*> parameters();
    std::vector<const Matrix*> parameters() const;

    struct StepOutcome {
        double loss = 0.0;
        std::size_t correct = 0;
        std::vector<Matrix> grads;  // aligned with parameters()
        Matrix center_update;       // empty unless the loss is center loss
    };

    // Training-mode forward and backward pass over one batch. `margin_lambda`
    // is used by the large-margin loss, `centers` by the center loss.
    StepOutcome forward_backward(const Matrix& inputs, Labels labels, double margin_lambda = 0.0,
                                 const ClassCenters* centers = nullptr);

    // True when every masked classifier entry is exactly zero (always true
    // for fc classifiers).
    bool masked_entries_zero() const;

private:
    ModelSpec spec_;
    std::vector<HiddenBlock> hidden_;
    std::optional<DenseLayer> fc_;
    std::optional<OslLayer> osl_;
};

double accuracy(const Matrix& probs, Labels labels);
// Fraction of argmax-correct predictions on one split, evaluation mode.
double evaluate(const Network& model, const Dataset& data, Split split);
double evaluate(const SnapshotSet<Network>& snapshots, const Dataset& data, Split split);
// Mean cross-entropy of evaluation-mode predictions on one split.
double evaluate_cross_entropy(const Network& model, const Dataset& data, Split split);

struct RunResult {
    std::size_t round = 0;
    std::uint64_t seed = 0;
    std::string arm;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double train_loss = 0.0;  // final evaluation-mode cross-entropy on train
    std::vector<double> loss_curve;
    std::vector<double> acc_curve;
    double wall_time_s = 0.0;
    std::string config_hash;
};

struct TrainOutcome {
    RunResult result;
    Network model;
    SnapshotSet<Network> snapshots;
};

// Deterministic in (spec, config, data); batches come from a seeded shuffle
// each epoch and the last incomplete batch is kept.
TrainOutcome train(const ModelSpec& spec, const TrainConfig& config, const Dataset& data);

// Stable fingerprint of a model/training setup (FNV-1a, hex).
std::string config_fingerprint(const ModelSpec& spec, const TrainConfig& config);
std::string fnv1a_hex(std::string_view text);

enum class RoundData { fixed, resplit, regenerate };

// How each round's dataset is produced from a base dataset or generator.
struct DataRecipe {
    std::variant<BlobParams, Dataset> source;
    RoundData per_round = RoundData::resplit;
    double train_fraction = 0.5;  // for datasets without a split
    std::size_t reduce_per_class = 0;
    std::uint64_t data_seed = 0;
};

// Base dataset plus the rule to derive round datasets from it. Read-only
// and shareable across threads once built.
class PreparedData {
public:
    explicit PreparedData(DataRecipe recipe);
    Dataset for_round(std::size_t round) const;
    const Dataset& base() const { return base_; }
    const DataRecipe& recipe() const { return recipe_; }

private:
    DataRecipe recipe_;
    Dataset base_;
};

struct RoundFailure {
    std::size_t round = 0;
    std::uint64_t seed = 0;
    std::string message;
    bool diverged = false;
};

struct RoundsOutcome {
    std::vector<RunResult> results;  // ordered by round
    std::vector<RoundFailure> failures;
    // Classifier weight matrices of successful rounds, same order as results.
    std::vector<Matrix> classifier_weights;
};

// Round i trains with seed = config.seed + i on data.for_round(i). Failures
// are recorded and the remaining rounds still run.
RoundsOutcome run_rounds(const ModelSpec& spec, const TrainConfig& config, const PreparedData& data,
                         std::size_t rounds, std::size_t workers = 1);

}  // namespace oslnet
