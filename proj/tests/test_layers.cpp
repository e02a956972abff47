#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "oslnet/errors.hpp"
#include "oslnet/layers.hpp"

using namespace oslnet;

namespace {

// Scalar probe L = Σ R ⊙ out, so dL/dout = R.
double probe(const Matrix& out, const Matrix& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.data().size(); ++i) s += out.data()[i] * r.data()[i];
    return s;
}

}  // namespace

TEST_SUITE("layers") {
    TEST_CASE("mask block sizes follow the remainder rule") {
        const MaskMatrix m = build_mask(10, 3);
        CHECK(m.block_sizes() == std::vector<std::size_t>{4, 3, 3});
        CHECK(m.block_begin(1) == 4);
        CHECK(m.class_of_row(9) == 2);
        CHECK(build_mask(32, 8).block_sizes() == std::vector<std::size_t>(8, 4));
        CHECK(build_mask(8, 8).matrix() == Matrix::identity(8));
        CHECK_THROWS_AS(build_mask(4, 8), ConfigError);
        CHECK_THROWS_AS(build_mask(4, 1), ConfigError);
    }

    TEST_CASE("mask property: one owner per row, disjoint columns") {
        for (std::size_t k = 2; k <= 9; ++k) {
            for (std::size_t d = k; d <= 40; d += 3) {
                const MaskMatrix m = build_mask(d, k);
                std::size_t total = 0;
                for (std::size_t r = 0; r < d; ++r) {
                    double row = 0.0;
                    for (std::size_t c = 0; c < k; ++c) row += m.matrix()(r, c);
                    CHECK(row == 1.0);
                    CHECK(m.matrix()(r, m.class_of_row(r)) == 1.0);
                }
                for (std::size_t c = 0; c < k; ++c) {
                    total += m.block_sizes()[c];
                    CHECK(m.block_sizes()[c] >= d / k);
                    CHECK(m.block_sizes()[c] <= d / k + 1);
                }
                CHECK(total == d);
            }
        }
    }

    TEST_CASE("osl logits equal the per-block computation bit for bit") {
        Rng rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t k = 2 + rng.below(7);
            const std::size_t d = k + rng.below(30);
            OslLayer layer(d, k, rng, trial % 2 == 0);
            const Matrix v = oracle::random_matrix(d, 5, rng);
            CHECK(layer.logits(v) == layer.logits_by_blocks(v));
        }
    }

    TEST_CASE("osl starts with zero masked entries and orthogonal columns") {
        Rng rng(6);
        OslLayer layer(20, 4, rng);
        const Matrix& w = layer.weights();
        for (std::size_t r = 0; r < 20; ++r)
            for (std::size_t c = 0; c < 4; ++c)
                if (layer.mask().matrix()(r, c) == 0.0) CHECK(w(r, c) == 0.0);
        const Matrix gram = matmul_tn(layer.effective_weights(), layer.effective_weights());
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                if (i != j) CHECK(gram(i, j) == 0.0);
    }

    TEST_CASE("osl rejects a wrong input width") {
        Rng rng(7);
        OslLayer layer(12, 3, rng);
        CHECK_THROWS_AS(layer.logits(Matrix(11, 2)), ShapeError);
    }

    TEST_CASE("osl forward with a fixed weight matrix") {
        // d = 4, k = 2: rows 0-1 feed class 0, rows 2-3 feed class 1
        const Matrix w{{1, 9}, {2, 9}, {9, 3}, {9, 4}};
        OslLayer layer(w, build_mask(4, 2));
        const Matrix v{{1}, {1}, {1}, {0}};
        const Matrix z = layer.logits(v);
        CHECK(z(0, 0) == 3.0);
        CHECK(z(1, 0) == 3.0);
        const Matrix p = layer.apply(v);
        CHECK(p(0, 0) == doctest::Approx(0.5));
    }

    TEST_CASE("dense gradients match finite differences") {
        Rng rng(8);
        for (int trial = 0; trial < 20; ++trial) {
            const Activation act = trial % 3 == 0 ? Activation::identity
                                   : trial % 3 == 1 ? Activation::relu
                                                    : Activation::softmax;
            DenseLayer layer(6, 4, act, true, rng);
            Matrix x = oracle::random_matrix(6, 3, rng);
            const Matrix r = oracle::random_matrix(4, 3, rng);
            layer.forward(x);
            const DenseGrads g = layer.backward(r);
            auto f = [&] { return probe(layer.apply(x), r); };
            CHECK(oracle::relative_error(g.weights, oracle::numeric_gradient(layer.weights(), f)) < 1e-5);
            CHECK(oracle::relative_error(g.bias, oracle::numeric_gradient(layer.bias(), f)) < 1e-5);
            CHECK(oracle::relative_error(g.input, oracle::numeric_gradient(x, f)) < 1e-5);
        }
    }

    TEST_CASE("osl gradients match finite differences and vanish off the mask") {
        Rng rng(9);
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t k = 2 + rng.below(5);
            const std::size_t d = k + rng.below(12);
            OslLayer layer(d, k, rng, trial % 2 == 1);
            Matrix v = oracle::random_matrix(d, 4, rng);
            const Matrix r = oracle::random_matrix(k, 4, rng);
            layer.forward(v);
            const OslGrads g = layer.backward(r);
            auto f = [&] { return probe(layer.apply(v), r); };
            const Matrix num_w = oracle::numeric_gradient(layer.weights(), f);
            CHECK(oracle::relative_error(g.weights, num_w) < 1e-5);
            CHECK(oracle::relative_error(g.input, oracle::numeric_gradient(v, f)) < 1e-5);
            if (layer.has_bias())
                CHECK(oracle::relative_error(g.bias, oracle::numeric_gradient(layer.bias(), f)) < 1e-5);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t c = 0; c < k; ++c)
                    if (layer.mask().matrix()(i, c) == 0.0) CHECK(g.weights(i, c) == 0.0);
        }
    }

    TEST_CASE("backward without forward is a state error") {
        Rng rng(10);
        DenseLayer dense(3, 2, Activation::relu, true, rng);
        CHECK_THROWS_AS(dense.backward(Matrix(2, 1)), StateError);
        OslLayer osl(4, 2, rng);
        CHECK_THROWS_AS(osl.backward(Matrix(2, 1)), StateError);
        DropConnectLayer dc(dense, 0.5, 1);
        CHECK_THROWS_AS(dc.backward(Matrix(2, 1)), StateError);
    }

    TEST_CASE("dropout probability bounds") {
        CHECK_THROWS_AS(DropoutLayer(1.0, 0), ConfigError);
        CHECK_THROWS_AS(DropoutLayer(-0.1, 0), ConfigError);
        DropoutLayer zero(0.0, 0);
        const Matrix x{{1, 2}, {3, 4}};
        CHECK(zero.forward(x) == x);
    }

    TEST_CASE("dropout is the identity in evaluation mode, gradient included") {
        Rng rng(11);
        for (int trial = 0; trial < 20; ++trial) {
            DropoutLayer drop(0.5, static_cast<std::uint64_t>(trial));
            drop.set_mode(Mode::eval);
            Matrix x = oracle::random_matrix(5, 3, rng);
            const Matrix r = oracle::random_matrix(5, 3, rng);
            CHECK(drop.forward(x) == x);
            const Matrix g = drop.backward(r);
            auto f = [&] { return probe(drop.forward(x), r); };
            CHECK(oracle::relative_error(g, oracle::numeric_gradient(x, f)) < 1e-5);
        }
    }

    TEST_CASE("inverted dropout keeps the expectation") {
        DropoutLayer drop(0.3, 42);
        const Matrix x(200, 250, 2.0);
        const Matrix y = drop.forward(x);
        double sum = 0.0;
        std::size_t zeros = 0;
        for (double v : y.data()) {
            sum += v;
            if (v == 0.0) ++zeros;
            else CHECK(v == doctest::Approx(2.0 / 0.7));
        }
        const double n = static_cast<double>(y.data().size());
        // binomial standard error of the drop fraction is about 0.001
        CHECK(std::abs(static_cast<double>(zeros) / n - 0.3) < 0.006);
        CHECK(std::abs(sum / n - 2.0) < 0.03);
        // backward routes through the same survivors
        const Matrix g = drop.backward(Matrix(200, 250, 1.0));
        for (std::size_t i = 0; i < y.data().size(); ++i) CHECK((g.data()[i] == 0.0) == (y.data()[i] == 0.0));
    }

    TEST_CASE("dropconnect evaluation uses the expected weights, gradient included") {
        Rng rng(12);
        for (int trial = 0; trial < 20; ++trial) {
            DenseLayer base(5, 3, trial % 2 ? Activation::relu : Activation::identity, true, rng);
            DropConnectLayer dc(base, 0.4, 7);
            dc.set_mode(Mode::eval);
            Matrix x = oracle::random_matrix(5, 4, rng);
            const Matrix r = oracle::random_matrix(3, 4, rng);
            const Matrix y = dc.forward(x);
            DenseLayer expected(base.weights() * 0.6, base.bias(), base.activation());
            CHECK(oracle::relative_error(y, expected.apply(x)) < 1e-15);
            CHECK(dc.apply(x) == y);
            const DenseGrads g = dc.backward(r);
            auto f = [&] { return probe(dc.apply(x), r); };
            CHECK(oracle::relative_error(g.weights, oracle::numeric_gradient(dc.dense().weights(), f)) < 1e-5);
            CHECK(oracle::relative_error(g.bias, oracle::numeric_gradient(dc.dense().bias(), f)) < 1e-5);
            CHECK(oracle::relative_error(g.input, oracle::numeric_gradient(x, f)) < 1e-5);
        }
    }

    TEST_CASE("dropconnect training gradient for a fixed mask") {
        Rng rng(13);
        DenseLayer base(6, 4, Activation::relu, true, rng);
        Matrix x = oracle::random_matrix(6, 3, rng);
        const Matrix r = oracle::random_matrix(4, 3, rng);
        DropConnectLayer dc(base, 0.5, 99);
        dc.forward(x);
        const DenseGrads g = dc.backward(r);
        // rebuilding with the same seed replays the same mask
        auto f = [&] {
            DropConnectLayer replay(dc.dense(), 0.5, 99);
            return probe(replay.forward(x), r);
        };
        CHECK(oracle::relative_error(g.weights, oracle::numeric_gradient(dc.dense().weights(), f)) < 1e-5);
        CHECK(oracle::relative_error(g.input, oracle::numeric_gradient(x, f)) < 1e-5);
    }

    TEST_CASE("dropconnect masks weights at the configured rate") {
        Rng rng(14);
        DenseLayer base(Matrix(100, 100, 1.0), std::nullopt, Activation::identity);
        DropConnectLayer dc(base, 0.25, 3);
        // one-hot inputs read single weight columns: y_j = Σ_i mask_ij
        const Matrix x(100, 1, 1.0);
        double mean = 0.0;
        const int reps = 20;
        for (int i = 0; i < reps; ++i) {
            const Matrix y = dc.forward(x);
            for (double v : y.data()) mean += v;
        }
        mean /= reps * 100.0 * 100.0;
        CHECK(std::abs(mean - 0.75) < 0.005);
    }

    TEST_CASE("uniform init stays inside the fan-in bound") {
        Rng rng(15);
        Matrix w(64, 16);
        init_uniform(w, 64, rng);
        double lo = 1.0, hi = -1.0;
        for (double v : w.data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo >= -0.125);
        CHECK(hi <= 0.125);
        CHECK(hi - lo > 0.2);
    }
}
