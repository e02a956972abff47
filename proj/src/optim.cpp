#include "oslnet/optim.hpp"

#include <cmath>
#include <numbers>

namespace oslnet {

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
    if (!(config_.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (config_.kind == OptimizerKind::rmsprop) {
        if (!(config_.smoothing >= 0.0 && config_.smoothing < 1.0))
            throw ConfigError("rmsprop smoothing must lie in [0, 1)");
        if (!(config_.epsilon > 0.0)) throw ConfigError("rmsprop epsilon must be positive");
    }
}

void Optimizer::step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr) {
    if (params.size() != grads.size()) {
        throw ShapeError("optimizer: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols()) {
            throw ShapeError("optimizer: parameter " + std::to_string(i) + " is " +
                             params[i]->shape_str() + " but its gradient is " +
                             grads[i].shape_str());
        }
    }

    if (config_.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto p = params[i]->data();
            auto g = grads[i].data();
            for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
        }
        ++step_count_;
        return;
    }

    if (accumulators_.empty()) {
        for (const Matrix& g : grads) accumulators_.emplace_back(g.rows(), g.cols());
    } else if (accumulators_.size() != params.size()) {
        throw ShapeError("optimizer: parameter list changed size between steps");
    }
    const double rho = config_.smoothing;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (accumulators_[i].rows() != grads[i].rows() || accumulators_[i].cols() != grads[i].cols())
            throw ShapeError("optimizer: parameter " + std::to_string(i) + " changed shape");
        auto p = params[i]->data();
        auto g = grads[i].data();
        auto acc = accumulators_[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            acc[j] = rho * acc[j] + (1.0 - rho) * g[j] * g[j];
            p[j] -= lr * g[j] / (std::sqrt(acc[j]) + config_.epsilon);
        }
    }
    ++step_count_;
}

CosineSchedule::CosineSchedule(double initial_rate, std::size_t cycle_length, std::size_t cycles)
    : initial_rate_(initial_rate), cycle_length_(cycle_length), cycles_(cycles) {
    if (!(initial_rate > 0.0)) throw ConfigError("cosine schedule: initial rate must be positive");
    if (cycle_length == 0 || cycles == 0)
        throw ConfigError("cosine schedule: cycle length and cycle count must be positive");
}

double CosineSchedule::rate(std::size_t global_step) const {
    if (global_step >= total_steps()) {
        throw ScheduleExhaustedError("cosine schedule exhausted: step " +
                                     std::to_string(global_step) + " of " +
                                     std::to_string(total_steps()));
    }
    const double t = static_cast<double>(global_step % cycle_length_);
    const double T = static_cast<double>(cycle_length_);
    return 0.5 * initial_rate_ * (1.0 + std::cos(std::numbers::pi * t / T));
}

bool CosineSchedule::is_cycle_boundary(std::size_t completed_steps) const {
    return completed_steps > 0 && completed_steps <= total_steps() &&
           completed_steps % cycle_length_ == 0;
}

}  // namespace oslnet
