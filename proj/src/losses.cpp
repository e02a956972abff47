#include "oslnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oslnet/errors.hpp"

namespace oslnet {

namespace {

void check_labels(const Matrix& probs, Labels labels) {
    if (labels.size() != probs.cols()) {
        throw ShapeError("loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(probs.cols()) + " samples");
    }
    if (labels.empty()) throw ArgumentError("loss: empty batch");
    for (std::size_t y : labels) {
        if (y >= probs.rows()) {
            throw LabelError("label " + std::to_string(y) + " out of range for " +
                             std::to_string(probs.rows()) + " classes");
        }
    }
}

// Shared shape of every loss that depends only on p_y: per-sample value f(p)
// and derivative df/dp, chained through dp_y/dz_j = p_y(δ_jy − p_j).
template <typename ValueAndSlope>
LossResult target_prob_loss(const Matrix& probs, Labels labels, ValueAndSlope&& fn) {
    check_labels(probs, labels);
    const double n = static_cast<double>(labels.size());
    LossResult out{0.0, Matrix(probs.rows(), probs.cols())};
    for (std::size_t c = 0; c < probs.cols(); ++c) {
        const std::size_t y = labels[c];
        const double p = probs(y, c);
        const auto [value, slope_times_p] = fn(p);
        out.loss += value;
        for (std::size_t r = 0; r < probs.rows(); ++r) {
            const double delta = (r == y ? 1.0 : 0.0) - probs(r, c);
            out.grad_logits(r, c) = slope_times_p * delta / n;
        }
    }
    out.loss /= n;
    return out;
}

constexpr double kTinyProb = 1e-300;

}  // namespace

double LargeMarginLoss::lambda_at_epoch(std::size_t epoch) const {
    return std::max(lambda_floor, lambda_start * std::pow(lambda_decay, static_cast<double>(epoch)));
}

void validate(const LossKind& kind) {
    std::visit(
        [](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, FocalLoss>) {
                if (!(k.gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
            } else if constexpr (std::is_same_v<T, CenterLoss>) {
                if (!(k.lambda >= 0.0)) throw ConfigError("center lambda must be >= 0");
                if (!(k.center_rate >= 0.0 && k.center_rate <= 1.0))
                    throw ConfigError("center rate must lie in [0, 1]");
            } else if constexpr (std::is_same_v<T, TruncatedLqLoss>) {
                if (!(k.q > 0.0 && k.q <= 1.0)) throw ConfigError("truncated_lq q must lie in (0, 1]");
                if (!(k.k_thresh >= 0.0 && k.k_thresh < 1.0))
                    throw ConfigError("truncated_lq k must lie in [0, 1)");
            } else if constexpr (std::is_same_v<T, LargeMarginLoss>) {
                if (k.m != 2) throw ConfigError("large_margin supports only m = 2");
                if (!(k.lambda_start >= 0.0 && k.lambda_floor >= 0.0 && k.lambda_decay > 0.0))
                    throw ConfigError("large_margin annealing parameters must be positive");
            }
        },
        kind);
}

std::string loss_name(const LossKind& kind) {
    static constexpr const char* names[] = {"cross_entropy", "focal", "center", "truncated_lq",
                                            "large_margin"};
    return names[kind.index()];
}

LossResult cross_entropy(const Matrix& probs, Labels labels) {
    return target_prob_loss(probs, labels, [](double p) {
        // d(−log p)/dp · p = −1
        return std::pair{-std::log(std::max(p, kTinyProb)), -1.0};
    });
}

LossResult focal(const Matrix& probs, Labels labels, double gamma) {
    if (!(gamma >= 0.0)) throw ArgumentError("focal: gamma must be >= 0");
    return target_prob_loss(probs, labels, [gamma](double p) {
        const double logp = std::log(std::max(p, kTinyProb));
        const double one_minus = 1.0 - p;
        const double weight = std::pow(one_minus, gamma);
        double slope_times_p = -weight;
        if (gamma > 0.0 && one_minus > 0.0) {
            // d/dp of −(1−p)^γ log p, times p
            slope_times_p += gamma * std::pow(one_minus, gamma - 1.0) * logp * p;
        }
        return std::pair{-weight * logp, slope_times_p};
    });
}

LossResult truncated_lq(const Matrix& probs, Labels labels, double q, double k_thresh) {
    if (!(q > 0.0 && q <= 1.0)) throw ArgumentError("truncated_lq: q must lie in (0, 1]");
    if (!(k_thresh >= 0.0 && k_thresh < 1.0))
        throw ArgumentError("truncated_lq: k must lie in [0, 1)");
    const double clamp_value = (1.0 - std::pow(k_thresh, q)) / q;
    return target_prob_loss(probs, labels, [=](double p) {
        if (p <= k_thresh) return std::pair{clamp_value, 0.0};
        const double pq = std::pow(p, q);
        // d/dp (1 − p^q)/q = −p^{q−1}
        return std::pair{(1.0 - pq) / q, -pq};
    });
}

CenterLossResult center_loss(const Matrix& features, Labels labels, const ClassCenters& centers,
                             double lambda) {
    if (labels.empty() || features.cols() == 0) throw ArgumentError("center_loss: empty batch");
    if (labels.size() != features.cols()) throw ShapeError("center_loss: label count mismatch");
    if (features.rows() != centers.centers.rows()) {
        throw ShapeError("center_loss: features " + features.shape_str() + " vs centers " +
                         centers.centers.shape_str());
    }
    const std::size_t dim = features.rows();
    const std::size_t k = centers.centers.cols();
    const double n = static_cast<double>(labels.size());

    CenterLossResult out{0.0, Matrix(dim, features.cols()), Matrix(dim, k)};
    Matrix class_sum(dim, k);
    std::vector<std::size_t> class_count(k, 0);
    for (std::size_t c = 0; c < features.cols(); ++c) {
        const std::size_t y = labels[c];
        if (y >= k) throw LabelError("center_loss: label " + std::to_string(y) + " out of range");
        ++class_count[y];
        for (std::size_t r = 0; r < dim; ++r) {
            const double diff = features(r, c) - centers.centers(r, y);
            out.loss += diff * diff;
            out.grad_features(r, c) = lambda * diff / n;
            class_sum(r, y) += features(r, c);
        }
    }
    out.loss *= 0.5 * lambda / n;
    for (std::size_t j = 0; j < k; ++j) {
        if (class_count[j] == 0) continue;
        for (std::size_t r = 0; r < dim; ++r) {
            const double mean = class_sum(r, j) / static_cast<double>(class_count[j]);
            out.center_update(r, j) = centers.rate * (mean - centers.centers(r, j));
        }
    }
    return out;
}

void apply_center_update(ClassCenters& centers, const Matrix& update) { centers.centers += update; }

double margin_psi(double cos_theta) {
    const double c = std::clamp(cos_theta, -1.0, 1.0);
    return 2.0 * c * std::abs(c) - 1.0;
}

namespace {

struct MarginTerms {
    double dot;
    double w_norm;
    double x_norm;
    bool defined;
};

MarginTerms margin_terms(const Matrix& weights, const Matrix& features, std::size_t y,
                         std::size_t c) {
    MarginTerms t{0.0, 0.0, 0.0, false};
    for (std::size_t r = 0; r < weights.rows(); ++r) {
        t.dot += weights(r, y) * features(r, c);
        t.w_norm += weights(r, y) * weights(r, y);
        t.x_norm += features(r, c) * features(r, c);
    }
    t.w_norm = std::sqrt(t.w_norm);
    t.x_norm = std::sqrt(t.x_norm);
    t.defined = t.w_norm > 0.0 && t.x_norm > 0.0;
    return t;
}

void check_margin_args(const Matrix& weights, const Matrix& features, Labels labels) {
    if (weights.rows() != features.rows()) {
        throw ShapeError("large_margin: weights " + weights.shape_str() + " vs features " +
                         features.shape_str());
    }
    if (labels.size() != features.cols()) throw ShapeError("large_margin: label count mismatch");
    for (std::size_t y : labels)
        if (y >= weights.cols()) throw LabelError("large_margin: label out of range");
}

}  // namespace

Matrix large_margin_logits(const Matrix& weights, const Matrix& features, Labels labels, int m,
                           double lambda_anneal) {
    if (m != 2) throw ArgumentError("large_margin: only m = 2 is supported");
    check_margin_args(weights, features, labels);
    Matrix logits = matmul_tn(weights, features);
    for (std::size_t c = 0; c < features.cols(); ++c) {
        const std::size_t y = labels[c];
        const MarginTerms t = margin_terms(weights, features, y, c);
        if (!t.defined) continue;
        const double norms = t.w_norm * t.x_norm;
        const double modified = norms * margin_psi(t.dot / norms);
        logits(y, c) = (lambda_anneal * logits(y, c) + modified) / (1.0 + lambda_anneal);
    }
    return logits;
}

LargeMarginGrads large_margin_backward(const Matrix& weights, const Matrix& features,
                                       Labels labels, double lambda_anneal,
                                       const Matrix& grad_logits) {
    check_margin_args(weights, features, labels);
    if (grad_logits.rows() != weights.cols() || grad_logits.cols() != features.cols())
        throw ShapeError("large_margin_backward: upstream " + grad_logits.shape_str());

    // Non-target logits are plain wᵀx; start from that and correct the target.
    LargeMarginGrads g{matmul_nt(features, grad_logits), matmul(weights, grad_logits)};
    const double blend = 1.0 / (1.0 + lambda_anneal);
    for (std::size_t c = 0; c < features.cols(); ++c) {
        const std::size_t y = labels[c];
        const MarginTerms t = margin_terms(weights, features, y, c);
        if (!t.defined) continue;
        const double up = grad_logits(y, c);
        // target = (λu + f)/(1+λ), f = 2u|u|/(ab) − ab, u = w·x, a = ‖w‖, b = ‖x‖
        const double u = t.dot, a = t.w_norm, b = t.x_norm;
        const double df_du = 4.0 * std::abs(u) / (a * b);
        const double df_da = -2.0 * u * std::abs(u) / (a * a * b) - b;
        const double df_db = -2.0 * u * std::abs(u) / (a * b * b) - a;
        // plain path already contributed up·∂u; rescale it to the blended weight
        const double du_coef = up * (blend * (lambda_anneal + df_du) - 1.0);
        const double da_coef = up * blend * df_da / a;
        const double db_coef = up * blend * df_db / b;
        for (std::size_t r = 0; r < weights.rows(); ++r) {
            const double w = weights(r, y);
            const double x = features(r, c);
            g.weights(r, y) += du_coef * x + da_coef * w;
            g.features(r, c) += du_coef * w + db_coef * x;
        }
    }
    return g;
}

}  // namespace oslnet
