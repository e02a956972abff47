#include "oslnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oslnet/errors.hpp"
#include "oslnet/random.hpp"

namespace oslnet {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("Matrix: " + std::to_string(data_.size()) +
                         " values cannot fill " + shape_str());
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer list");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::col(std::size_t c) const {
    Matrix out(rows_, 1);
    for (std::size_t r = 0; r < rows_; ++r) out(r, 0) = (*this)(r, c);
    return out;
}

Matrix Matrix::transpose() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
}

Matrix Matrix::select_cols(std::span<const std::size_t> indices) const {
    Matrix out(rows_, indices.size());
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t j = 0; j < indices.size(); ++j) out(r, j) = (*this)(r, indices[j]);
    return out;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix& Matrix::operator+=(const Matrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_str() const {
    std::ostringstream os;
    os << rows_ << "x" << cols_;
    return os.str();
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: cannot multiply " + a.shape_str() + " by " + b.shape_str());
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: cannot multiply transpose of " + a.shape_str() + " by " +
                         b.shape_str());
    }
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto a_row = a.row(k);
        auto b_row = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a_row[i];
            if (aki == 0.0) continue;
            auto out_row = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: cannot multiply " + a.shape_str() + " by transpose of " +
                         b.shape_str());
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    auto o = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
    return out;
}

Matrix relu(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t c = 0; c < logits.cols(); ++c) {
        double peak = logits(0, c);
        for (std::size_t r = 1; r < logits.rows(); ++r) peak = std::max(peak, logits(r, c));
        double total = 0.0;
        for (std::size_t r = 0; r < logits.rows(); ++r) {
            out(r, c) = std::exp(logits(r, c) - peak);
            total += out(r, c);
        }
        for (std::size_t r = 0; r < logits.rows(); ++r) out(r, c) /= total;
    }
    return out;
}

void add_column_broadcast(Matrix& m, const Matrix& bias) {
    if (bias.rows() != m.rows() || bias.cols() != 1) {
        throw ShapeError("add_column_broadcast: bias " + bias.shape_str() + " does not fit " +
                         m.shape_str());
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double b = bias(r, 0);
        for (double& v : m.row(r)) v += b;
    }
}

Matrix row_sums(const Matrix& m) {
    Matrix out(m.rows(), 1);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (double v : m.row(r)) s += v;
        out(r, 0) = s;
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double frobenius_norm(const Matrix& m) { return std::sqrt(dot(m.data(), m.data())); }

std::size_t argmax_in_column(const Matrix& m, std::size_t c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < m.rows(); ++r)
        if (m(r, c) > m(best, c)) best = r;
    return best;
}

double spectral_norm(const Matrix& a, std::size_t iters, double tol, std::uint64_t seed) {
    if (iters == 0) throw ArgumentError("spectral_norm: iters must be at least 1");
    if (frobenius_norm(a) == 0.0) return 0.0;

    const std::size_t n = a.cols();
    Rng rng(seed);
    Matrix v(n, 1);
    for (double& x : v.data()) x = rng.normal();

    auto normalize = [](Matrix& x) {
        const double norm = frobenius_norm(x);
        if (norm == 0.0) return false;
        x *= 1.0 / norm;
        return true;
    };
    normalize(v);

    double estimate = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        Matrix w = matmul_tn(a, matmul(a, v));
        // Rayleigh quotient of aᵀa at the current unit vector
        const double next = std::sqrt(std::max(0.0, dot(v.data(), w.data())));
        if (!normalize(w)) {
            // start vector fell into the null space; restart from a basis vector
            v.fill(0.0);
            v(it % n, 0) = 1.0;
            continue;
        }
        v = std::move(w);
        if (it > 0 && std::abs(next - estimate) < tol) {
            estimate = next;
            break;
        }
        estimate = next;
    }
    // one more Rayleigh evaluation at the converged vector
    const Matrix av = matmul(a, v);
    return std::max(estimate, frobenius_norm(av));
}

}  // namespace oslnet
