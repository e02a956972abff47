#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "oslnet/linalg.hpp"
#include "oslnet/random.hpp"

namespace oslnet {

enum class Activation { identity, relu, softmax };
enum class Mode { train, eval };

// Fixed block-diagonal 0/1 mask of an orthogonal softmax layer: column j has
// ones on a contiguous row range owned by class j and nowhere else.
class MaskMatrix {
public:
    // Requires d >= k >= 2. The first d mod k classes get ceil(d/k) rows, the
    // rest floor(d/k), assigned contiguously in class order.
    static MaskMatrix build(std::size_t d, std::size_t k);

    std::size_t d() const { return matrix_.rows(); }
    std::size_t k() const { return matrix_.cols(); }
    const std::vector<std::size_t>& block_sizes() const { return block_sizes_; }
    std::size_t block_begin(std::size_t cls) const { return block_begin_[cls]; }
    std::size_t block_end(std::size_t cls) const { return block_begin_[cls] + block_sizes_[cls]; }
    std::size_t class_of_row(std::size_t row) const;
    const Matrix& matrix() const { return matrix_; }

private:
    MaskMatrix(Matrix m, std::vector<std::size_t> sizes, std::vector<std::size_t> begins)
        : matrix_(std::move(m)), block_sizes_(std::move(sizes)), block_begin_(std::move(begins)) {}

    Matrix matrix_;
    std::vector<std::size_t> block_sizes_;
    std::vector<std::size_t> block_begin_;
};

inline MaskMatrix build_mask(std::size_t d, std::size_t k) { return MaskMatrix::build(d, k); }

// Draws every entry uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(Matrix& m, std::size_t fan_in, Rng& rng);

// Vector-Jacobian product of the column-wise softmax: given probabilities s
// and dL/ds, returns dL/dz.
Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs);

struct DenseGrads {
    Matrix weights;
    Matrix bias;  // empty when the layer has no bias
    Matrix input;
};

// r = a(Wᵀx + b) with W stored d_in × d_out.
class DenseLayer {
public:
    DenseLayer() = default;
    DenseLayer(std::size_t d_in, std::size_t d_out, Activation act, bool with_bias, Rng& rng);
    DenseLayer(Matrix weights, std::optional<Matrix> bias, Activation act);

    std::size_t d_in() const { return weights_.rows(); }
    std::size_t d_out() const { return weights_.cols(); }
    Activation activation() const { return activation_; }
    bool has_bias() const { return bias_.has_value(); }

    Matrix& weights() { return weights_; }
    const Matrix& weights() const { return weights_; }
    Matrix& bias() { return *bias_; }
    const Matrix& bias() const { return *bias_; }

    // Pre-activation Wᵀx + b; caches the input for backward_pre.
    Matrix forward_pre(const Matrix& x);
    // Activated output; caches input and output.
    Matrix forward(const Matrix& x);
    // Pure evaluation, no caching.
    Matrix apply(const Matrix& x) const;

    DenseGrads backward_pre(const Matrix& grad_pre) const;
    DenseGrads backward(const Matrix& grad_out) const;

private:
    Matrix pre_activation(const Matrix& x) const;

    Matrix weights_;
    std::optional<Matrix> bias_;
    Activation activation_ = Activation::identity;
    std::optional<Matrix> cached_input_;
    std::optional<Matrix> cached_pre_;
    std::optional<Matrix> cached_out_;
};

struct OslGrads {
    Matrix weights;  // exactly zero at every masked position
    Matrix bias;     // empty when the layer has no bias
    Matrix input;
};

// Orthogonal softmax layer: r = softmax((M ⊙ W)ᵀ v [+ b]). The optional
// per-class bias does not touch the weight columns, so their orthogonality
// is unaffected.
class OslLayer {
public:
    OslLayer() = default;
    // Masked entries start at zero; only block entries are drawn.
    OslLayer(std::size_t d_in, std::size_t k, Rng& rng, bool with_bias = false);
    OslLayer(Matrix weights, MaskMatrix mask, std::optional<Matrix> bias = std::nullopt);

    std::size_t d_in() const { return mask_->d(); }
    std::size_t k() const { return mask_->k(); }
    const MaskMatrix& mask() const { return *mask_; }
    Matrix& weights() { return weights_; }
    const Matrix& weights() const { return weights_; }
    bool has_bias() const { return bias_.has_value(); }
    Matrix& bias() { return *bias_; }
    const Matrix& bias() const { return *bias_; }

    Matrix effective_weights() const;

    // Logits via the full masked product.
    Matrix logits(const Matrix& v) const;
    // Logits computed per class from its own block only; bit-identical to
    // logits() on finite inputs.
    Matrix logits_by_blocks(const Matrix& v) const;

    Matrix forward_pre(const Matrix& v);
    Matrix forward(const Matrix& v);
    Matrix apply(const Matrix& v) const { return softmax(logits(v)); }

    OslGrads backward_pre(const Matrix& grad_logits) const;
    // Gradient with respect to the softmax output.
    OslGrads backward(const Matrix& grad_probs) const;

private:
    void check_input(const Matrix& v) const;

    Matrix weights_;
    std::optional<MaskMatrix> mask_;
    std::optional<Matrix> bias_;
    std::optional<Matrix> cached_input_;
    std::optional<Matrix> cached_out_;
};

// Inverted dropout: survivors are scaled by 1/(1-p) in training.
class DropoutLayer {
public:
    DropoutLayer(double p, std::uint64_t seed);

    double p() const { return p_; }
    Mode mode() const { return mode_; }
    void set_mode(Mode m) { mode_ = m; }

    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& grad_out) const;

private:
    double p_;
    Mode mode_ = Mode::train;
    Rng rng_;
    std::optional<Matrix> cached_scale_;
};

// Dense layer whose weights are multiplied by a fresh Bernoulli(1-q) mask on
// every training forward pass; evaluation uses the expected weights (1-q)W.
class DropConnectLayer {
public:
    DropConnectLayer(DenseLayer base, double q, std::uint64_t seed);

    double q() const { return q_; }
    Mode mode() const { return mode_; }
    void set_mode(Mode m) { mode_ = m; }
    DenseLayer& dense() { return base_; }
    const DenseLayer& dense() const { return base_; }

    Matrix forward(const Matrix& x);
    Matrix apply(const Matrix& x) const;
    // Weight gradient is with respect to the underlying (unmasked) weights.
    DenseGrads backward(const Matrix& grad_out) const;

private:
    Matrix effective_weights_eval() const;

    DenseLayer base_;
    double q_;
    Mode mode_ = Mode::train;
    Rng rng_;
    std::optional<Matrix> cached_mask_;
    std::optional<DenseLayer> cached_masked_;
};

}  // namespace oslnet
