#include "oslnet/layers.hpp"

#include <cmath>
#include <string>

#include "oslnet/errors.hpp"

namespace oslnet {

namespace {

Matrix activate(const Matrix& pre, Activation act) {
    switch (act) {
        case Activation::relu: return relu(pre);
        case Activation::softmax: return softmax(pre);
        case Activation::identity: break;
    }
    return pre;
}

Matrix activation_backward(const Matrix& pre, const Matrix& out, const Matrix& grad_out,
                           Activation act) {
    switch (act) {
        case Activation::relu: {
            Matrix g = grad_out;
            auto gd = g.data();
            auto pd = pre.data();
            for (std::size_t i = 0; i < gd.size(); ++i)
                if (pd[i] <= 0.0) gd[i] = 0.0;
            return g;
        }
        case Activation::softmax: return softmax_backward(out, grad_out);
        case Activation::identity: break;
    }
    return grad_out;
}

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError(std::string(what) + " must lie in [0, 1), got " + std::to_string(p));
    }
}

}  // namespace

MaskMatrix MaskMatrix::build(std::size_t d, std::size_t k) {
    if (k < 2) throw ConfigError("orthogonal softmax layer needs at least 2 classes");
    if (d < k) {
        throw ConfigError("each class needs at least one hidden neuron: width " +
                          std::to_string(d) + " < class count " + std::to_string(k));
    }
    std::vector<std::size_t> sizes(k, d / k);
    for (std::size_t j = 0; j < d % k; ++j) ++sizes[j];
    std::vector<std::size_t> begins(k, 0);
    Matrix m(d, k);
    std::size_t row = 0;
    for (std::size_t j = 0; j < k; ++j) {
        begins[j] = row;
        for (std::size_t i = 0; i < sizes[j]; ++i) m(row++, j) = 1.0;
    }
    return MaskMatrix(std::move(m), std::move(sizes), std::move(begins));
}

std::size_t MaskMatrix::class_of_row(std::size_t row) const {
    for (std::size_t j = 0; j < k(); ++j)
        if (row < block_end(j)) return j;
    throw ArgumentError("mask row " + std::to_string(row) + " out of range");
}

void init_uniform(Matrix& m, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : m.data()) v = rng.uniform(-bound, bound);
}

Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs) {
    if (probs.rows() != grad_probs.rows() || probs.cols() != grad_probs.cols()) {
        throw ShapeError("softmax_backward: " + probs.shape_str() + " vs " +
                         grad_probs.shape_str());
    }
    Matrix g(probs.rows(), probs.cols());
    for (std::size_t c = 0; c < probs.cols(); ++c) {
        double inner = 0.0;
        for (std::size_t r = 0; r < probs.rows(); ++r) inner += probs(r, c) * grad_probs(r, c);
        for (std::size_t r = 0; r < probs.rows(); ++r)
            g(r, c) = probs(r, c) * (grad_probs(r, c) - inner);
    }
    return g;
}

// ---------------------------------------------------------------- dense

DenseLayer::DenseLayer(std::size_t d_in, std::size_t d_out, Activation act, bool with_bias,
                       Rng& rng)
    : weights_(d_in, d_out), activation_(act) {
    if (d_in == 0 || d_out == 0) throw ConfigError("dense layer widths must be positive");
    init_uniform(weights_, d_in, rng);
    if (with_bias) {
        bias_ = Matrix(d_out, 1);
        init_uniform(*bias_, d_in, rng);
    }
}

DenseLayer::DenseLayer(Matrix weights, std::optional<Matrix> bias, Activation act)
    : weights_(std::move(weights)), bias_(std::move(bias)), activation_(act) {
    if (bias_ && (bias_->rows() != weights_.cols() || bias_->cols() != 1)) {
        throw ShapeError("dense layer bias " + bias_->shape_str() + " does not match weights " +
                         weights_.shape_str());
    }
}

Matrix DenseLayer::pre_activation(const Matrix& x) const {
    if (x.rows() != d_in()) {
        throw ShapeError("dense layer expects " + std::to_string(d_in()) + " input rows, got " +
                         x.shape_str());
    }
    Matrix pre = matmul_tn(weights_, x);
    if (bias_) add_column_broadcast(pre, *bias_);
    return pre;
}

Matrix DenseLayer::forward_pre(const Matrix& x) {
    Matrix pre = pre_activation(x);
    cached_input_ = x;
    cached_pre_.reset();
    cached_out_.reset();
    return pre;
}

Matrix DenseLayer::forward(const Matrix& x) {
    Matrix pre = pre_activation(x);
    Matrix out = activate(pre, activation_);
    cached_input_ = x;
    cached_pre_ = std::move(pre);
    cached_out_ = out;
    return out;
}

Matrix DenseLayer::apply(const Matrix& x) const { return activate(pre_activation(x), activation_); }

DenseGrads DenseLayer::backward_pre(const Matrix& grad_pre) const {
    if (!cached_input_) throw StateError("dense backward called before forward");
    const Matrix& x = *cached_input_;
    if (grad_pre.rows() != d_out() || grad_pre.cols() != x.cols()) {
        throw ShapeError("dense backward: upstream " + grad_pre.shape_str() + " for output " +
                         std::to_string(d_out()) + "x" + std::to_string(x.cols()));
    }
    DenseGrads g;
    g.weights = matmul_nt(x, grad_pre);
    if (bias_) g.bias = row_sums(grad_pre);
    g.input = matmul(weights_, grad_pre);
    return g;
}

DenseGrads DenseLayer::backward(const Matrix& grad_out) const {
    if (!cached_pre_ || !cached_out_) throw StateError("dense backward called before forward");
    return backward_pre(activation_backward(*cached_pre_, *cached_out_, grad_out, activation_));
}

// ---------------------------------------------------------------- OSL

OslLayer::OslLayer(std::size_t d_in, std::size_t k, Rng& rng, bool with_bias)
    : weights_(d_in, k), mask_(MaskMatrix::build(d_in, k)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = mask_->block_begin(j); i < mask_->block_end(j); ++i)
            weights_(i, j) = rng.uniform(-bound, bound);
    if (with_bias) {
        bias_ = Matrix(k, 1);
        init_uniform(*bias_, d_in, rng);
    }
}

OslLayer::OslLayer(Matrix weights, MaskMatrix mask, std::optional<Matrix> bias)
    : weights_(std::move(weights)), mask_(std::move(mask)), bias_(std::move(bias)) {
    if (weights_.rows() != mask_->d() || weights_.cols() != mask_->k()) {
        throw ShapeError("OSL weights " + weights_.shape_str() + " do not match mask " +
                         mask_->matrix().shape_str());
    }
    if (bias_ && (bias_->rows() != mask_->k() || bias_->cols() != 1))
        throw ShapeError("OSL bias " + bias_->shape_str() + " does not match class count");
}

Matrix OslLayer::effective_weights() const { return hadamard(mask_->matrix(), weights_); }

void OslLayer::check_input(const Matrix& v) const {
    if (v.rows() != d_in()) {
        throw ShapeError("OSL expects " + std::to_string(d_in()) + " input rows, got " +
                         v.shape_str());
    }
}

Matrix OslLayer::logits(const Matrix& v) const {
    check_input(v);
    Matrix z = matmul_tn(effective_weights(), v);
    if (bias_) add_column_broadcast(z, *bias_);
    return z;
}

Matrix OslLayer::logits_by_blocks(const Matrix& v) const {
    check_input(v);
    Matrix out(k(), v.cols());
    for (std::size_t j = 0; j < k(); ++j) {
        for (std::size_t c = 0; c < v.cols(); ++c) {
            double s = 0.0;
            for (std::size_t i = mask_->block_begin(j); i < mask_->block_end(j); ++i)
                s += weights_(i, j) * v(i, c);
            out(j, c) = bias_ ? s + (*bias_)(j, 0) : s;
        }
    }
    return out;
}

Matrix OslLayer::forward_pre(const Matrix& v) {
    Matrix z = logits(v);
    cached_input_ = v;
    cached_out_.reset();
    return z;
}

Matrix OslLayer::forward(const Matrix& v) {
    Matrix out = softmax(logits(v));
    cached_input_ = v;
    cached_out_ = out;
    return out;
}

OslGrads OslLayer::backward_pre(const Matrix& grad_logits) const {
    if (!cached_input_) throw StateError("OSL backward called without a cached input");
    const Matrix& v = *cached_input_;
    if (grad_logits.rows() != k() || grad_logits.cols() != v.cols()) {
        throw ShapeError("OSL backward: upstream " + grad_logits.shape_str() + " for output " +
                         std::to_string(k()) + "x" + std::to_string(v.cols()));
    }
    OslGrads g;
    g.weights = Matrix(d_in(), k());
    for (std::size_t j = 0; j < k(); ++j)
        for (std::size_t i = mask_->block_begin(j); i < mask_->block_end(j); ++i)
            g.weights(i, j) = dot(v.row(i), grad_logits.row(j));
    if (bias_) g.bias = row_sums(grad_logits);
    g.input = matmul(effective_weights(), grad_logits);
    return g;
}

OslGrads OslLayer::backward(const Matrix& grad_probs) const {
    if (!cached_out_) throw StateError("OSL backward called without a cached forward pass");
    return backward_pre(softmax_backward(*cached_out_, grad_probs));
}

// ---------------------------------------------------------------- dropout

DropoutLayer::DropoutLayer(double p, std::uint64_t seed) : p_(p), rng_(seed) {
    check_probability(p, "dropout probability");
}

Matrix DropoutLayer::forward(const Matrix& x) {
    if (mode_ == Mode::eval || p_ == 0.0) {
        cached_scale_.reset();
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - p_);
    Matrix scale(x.rows(), x.cols());
    for (double& s : scale.data()) s = rng_.bernoulli(1.0 - p_) ? keep_scale : 0.0;
    Matrix out = hadamard(x, scale);
    cached_scale_ = std::move(scale);
    return out;
}

Matrix DropoutLayer::backward(const Matrix& grad_out) const {
    if (!cached_scale_) return grad_out;
    return hadamard(grad_out, *cached_scale_);
}

// ---------------------------------------------------------------- dropconnect

DropConnectLayer::DropConnectLayer(DenseLayer base, double q, std::uint64_t seed)
    : base_(std::move(base)), q_(q), rng_(seed) {
    check_probability(q, "dropconnect probability");
}

Matrix DropConnectLayer::effective_weights_eval() const { return base_.weights() * (1.0 - q_); }

Matrix DropConnectLayer::apply(const Matrix& x) const {
    DenseLayer expected(effective_weights_eval(),
                        base_.has_bias() ? std::optional<Matrix>(base_.bias()) : std::nullopt,
                        base_.activation());
    return expected.apply(x);
}

Matrix DropConnectLayer::forward(const Matrix& x) {
    Matrix mask(base_.d_in(), base_.d_out());
    if (mode_ == Mode::train) {
        for (double& m : mask.data()) m = rng_.bernoulli(1.0 - q_) ? 1.0 : 0.0;
    } else {
        mask.fill(1.0 - q_);
    }
    DenseLayer masked(hadamard(mask, base_.weights()),
                      base_.has_bias() ? std::optional<Matrix>(base_.bias()) : std::nullopt,
                      base_.activation());
    Matrix out = masked.forward(x);
    cached_mask_ = std::move(mask);
    cached_masked_ = std::move(masked);
    return out;
}

DenseGrads DropConnectLayer::backward(const Matrix& grad_out) const {
    if (!cached_masked_) throw StateError("dropconnect backward called before forward");
    DenseGrads g = cached_masked_->backward(grad_out);
    g.weights = hadamard(g.weights, *cached_mask_);
    return g;
}

}  // namespace oslnet
