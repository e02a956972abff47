#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "oslnet/linalg.hpp"
#include "oslnet/random.hpp"

namespace oracle {

using oslnet::Matrix;

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, oslnet::Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

inline double largest_singular_value(const Matrix& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
    return svd.singularValues()(0);
}

// Central differences of a scalar function with respect to every entry of x.
inline Matrix numeric_gradient(Matrix& x, const std::function<double()>& f, double h = 1e-6) {
    Matrix g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        const double saved = x.data()[i];
        x.data()[i] = saved + h;
        const double up = f();
        x.data()[i] = saved - h;
        const double down = f();
        x.data()[i] = saved;
        g.data()[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// ‖a − b‖ / max(‖a‖, ‖b‖); 0 when both vanish.
inline double relative_error(const Matrix& a, const Matrix& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        diff += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    const double denom = std::sqrt(std::max(na, nb));
    return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

inline double t_cdf(double t, double df) {
    return boost::math::cdf(boost::math::students_t_distribution<double>(df), t);
}

inline double t_two_tailed(double t, double df) {
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df),
                                                          std::abs(t)));
}

inline double t_critical(double alpha_two_tailed, double df) {
    return boost::math::quantile(
        boost::math::complement(boost::math::students_t_distribution<double>(df), alpha_two_tailed / 2.0));
}

// Paired t statistic written out directly from the textbook formula.
inline double paired_t(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    return mean / (sd / std::sqrt(static_cast<double>(n)));
}

}  // namespace oracle
