#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "oslnet/errors.hpp"
#include "oslnet/linalg.hpp"

namespace oslnet {

enum class OptimizerKind { rmsprop, sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::rmsprop;
    double lr = 0.001;
    double smoothing = 0.99;  // rmsprop only
    double epsilon = 1e-8;    // rmsprop only
};

// Optimizer plus its per-parameter state. Parameters are addressed by their
// position in the span passed to step(); that order must stay fixed.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config);

    const OptimizerConfig& config() const { return config_; }
    std::size_t step_count() const { return step_count_; }
    const std::vector<Matrix>& accumulators() const { return accumulators_; }

    // One update with learning rate `lr`:
    //   rmsprop: acc ← ρ·acc + (1−ρ)·g²;  p ← p − lr·g / (√acc + ε)
    //   sgd:     p ← p − lr·g
    void step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr);
    void step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
        step(params, grads, config_.lr);
    }

private:
    OptimizerConfig config_;
    std::vector<Matrix> accumulators_;
    std::size_t step_count_ = 0;
};

// Cyclic cosine annealing with warm restarts:
//   η(t) = η0/2 · (1 + cos(π · (t mod T) / T)),  0 ≤ t < cycles·T
class CosineSchedule {
public:
    CosineSchedule(double initial_rate, std::size_t cycle_length, std::size_t cycles);

    double initial_rate() const { return initial_rate_; }
    std::size_t cycle_length() const { return cycle_length_; }
    std::size_t cycles() const { return cycles_; }
    std::size_t total_steps() const { return cycle_length_ * cycles_; }

    double rate(std::size_t global_step) const;
    bool is_cycle_boundary(std::size_t completed_steps) const;

private:
    double initial_rate_;
    std::size_t cycle_length_;
    std::size_t cycles_;
};

inline double cosine_rate(const CosineSchedule& schedule, std::size_t global_step) {
    return schedule.rate(global_step);
}

// Parameter sets saved at the end of each annealing cycle. Model must be
// copyable and expose `Matrix predict(const Matrix&) const` returning class
// probabilities, one column per sample.
template <typename Model>
class SnapshotSet {
public:
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    const std::vector<Model>& members() const { return members_; }

    // `completed_steps` counts schedule steps finished so far.
    void capture(const Model& model, std::size_t completed_steps, const CosineSchedule& schedule) {
        if (!schedule.is_cycle_boundary(completed_steps)) {
            throw ProtocolError("snapshot requested at step " + std::to_string(completed_steps) +
                                ", which is not the end of a cycle of length " +
                                std::to_string(schedule.cycle_length()));
        }
        members_.push_back(model);
    }

private:
    std::vector<Model> members_;
};

// Arithmetic mean of the members' softmax outputs.
template <typename Model>
Matrix ensemble_predict(const SnapshotSet<Model>& set, const Matrix& inputs) {
    if (set.empty()) throw StateError("ensemble_predict: snapshot set is empty");
    Matrix total = set.members().front().predict(inputs);
    for (std::size_t i = 1; i < set.size(); ++i) total += set.members()[i].predict(inputs);
    total *= 1.0 / static_cast<double>(set.size());
    return total;
}

}  // namespace oslnet
