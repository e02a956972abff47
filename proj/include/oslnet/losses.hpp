#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>

#include "oslnet/linalg.hpp"

namespace oslnet {

using Labels = std::span<const std::size_t>;

struct CrossEntropyLoss {};

struct FocalLoss {
    double gamma = 0.3;
};

// Cross-entropy plus the center penalty on classifier input features.
struct CenterLoss {
    double lambda = 1e-10;
    double center_rate = 0.5;
};

struct TruncatedLqLoss {
    double q = 0.5;
    double k_thresh = 0.1;
};

// Large-margin softmax. The blend weight starts at lambda_start and is
// multiplied by lambda_decay after every epoch, never going below lambda_floor.
struct LargeMarginLoss {
    int m = 2;
    double lambda_start = 100.0;
    double lambda_decay = 0.99;
    double lambda_floor = 0.1;

    double lambda_at_epoch(std::size_t epoch) const;
};

using LossKind = std::variant<CrossEntropyLoss, FocalLoss, CenterLoss, TruncatedLqLoss, LargeMarginLoss>;

void validate(const LossKind& kind);
std::string loss_name(const LossKind& kind);

struct LossResult {
    double loss = 0.0;  // batch mean
    Matrix grad_logits;
};

// All probability-based losses take softmax outputs (k × batch) and return
// the gradient with respect to the logits that produced them.
LossResult cross_entropy(const Matrix& probs, Labels labels);
LossResult focal(const Matrix& probs, Labels labels, double gamma);
// Per sample (1 - p^q)/q while p > k_thresh, else the constant (1 - k^q)/q
// with zero gradient.
LossResult truncated_lq(const Matrix& probs, Labels labels, double q, double k_thresh);

struct ClassCenters {
    ClassCenters() = default;
    ClassCenters(std::size_t feature_dim, std::size_t k, double rate = 0.5)
        : centers(feature_dim, k), rate(rate) {}

    Matrix centers;  // feature_dim × k
    double rate = 0.5;
};

struct CenterLossResult {
    double loss = 0.0;
    Matrix grad_features;
    Matrix center_update;  // add to ClassCenters::centers
};

// lambda/2 · mean ‖f_i − c_{y_i}‖². The update moves each class seen in the
// batch toward its batch mean by the center rate.
CenterLossResult center_loss(const Matrix& features, Labels labels, const ClassCenters& centers,
                             double lambda);
void apply_center_update(ClassCenters& centers, const Matrix& update);

// ψ(θ) for m = 2, written in terms of c = cos θ: 2c|c| − 1.
double margin_psi(double cos_theta);

// Logits of an unbiased dense classifier (weights d × k, features d × batch)
// with the target-class logit replaced by
// (λ·‖w‖‖x‖cosθ + ‖w‖‖x‖ψ(θ)) / (1 + λ).
Matrix large_margin_logits(const Matrix& weights, const Matrix& features, Labels labels, int m,
                           double lambda_anneal);

struct LargeMarginGrads {
    Matrix weights;
    Matrix features;
};

LargeMarginGrads large_margin_backward(const Matrix& weights, const Matrix& features,
                                       Labels labels, double lambda_anneal,
                                       const Matrix& grad_logits);

}  // namespace oslnet
