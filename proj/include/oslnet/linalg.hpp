#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace oslnet {

// Dense row-major double matrix. Vectors are matrices with one column and a
// batch of samples is stored one sample per column.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    // Nested-list construction, one inner list per row.
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix column(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    Matrix col(std::size_t c) const;
    Matrix transpose() const;

    // Columns listed in `indices`, in that order.
    Matrix select_cols(std::span<const std::size_t> indices) const;

    void fill(double v);
    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    bool all_finite() const;
    std::string shape_str() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

Matrix matmul(const Matrix& a, const Matrix& b);
// aᵀ·b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a·bᵀ without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix relu(const Matrix& x);
// Column-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

// Adds `bias` (rows × 1) to every column of `m` in place.
void add_column_broadcast(Matrix& m, const Matrix& bias);
// Sum over columns, giving a rows × 1 matrix.
Matrix row_sums(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b);
double frobenius_norm(const Matrix& m);
std::size_t argmax_in_column(const Matrix& m, std::size_t c);

inline constexpr std::size_t kPowerIterations = 1000;
inline constexpr double kPowerTolerance = 1e-10;

// Largest singular value by power iteration on aᵀa; the start vector is
// drawn from `seed`. A zero matrix yields 0.
double spectral_norm(const Matrix& a, std::size_t iters = kPowerIterations,
                     double tol = kPowerTolerance, std::uint64_t seed = 0);

}  // namespace oslnet
