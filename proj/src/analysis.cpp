#include "oslnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "oslnet/errors.hpp"
#include "oslnet/layers.hpp"
#include "oslnet/random.hpp"

namespace oslnet {

std::vector<double> AngleMatrix::upper_triangle() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < degrees.rows(); ++i)
        for (std::size_t j = i + 1; j < degrees.cols(); ++j) out.push_back(degrees(i, j));
    return out;
}

AngleMatrix angle_matrix(const Matrix& weights) {
    const std::size_t k = weights.cols();
    const Matrix cols = weights.transpose();  // one class per row
    std::vector<double> norms(k);
    for (std::size_t j = 0; j < k; ++j) {
        norms[j] = std::sqrt(dot(cols.row(j), cols.row(j)));
        if (norms[j] == 0.0)
            throw DegenerateWeightsError("weight vector of class " + std::to_string(j) + " is zero", j);
    }
    AngleMatrix out{Matrix(k, k)};
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double cosine = std::clamp(dot(cols.row(i), cols.row(j)) / (norms[i] * norms[j]), -1.0, 1.0);
            const double deg = std::acos(cosine) * 180.0 / std::numbers::pi;
            out.degrees(i, j) = deg;
            out.degrees(j, i) = deg;
        }
    }
    return out;
}

NormBoundReport verify_norm_bounds(std::size_t d, std::size_t k, double bound, std::size_t trials,
                                   std::uint64_t seed) {
    if (trials == 0) throw ArgumentError("verify_norm_bounds: trials must be >= 1");
    if (!(bound > 0.0)) throw ArgumentError("verify_norm_bounds: bound must be positive");
    const MaskMatrix mask = MaskMatrix::build(d, k);
    const double masked_limit = std::sqrt(static_cast<double>(d)) * bound;
    const double full_limit = std::sqrt(static_cast<double>(d * k)) * bound;
    // Power iteration converges from below; allow for its tolerance only.
    const double slack = 1e-9;

    NormBoundReport r;
    r.d = d;
    r.k = k;
    r.bound = bound;
    r.trials = trials;
    Rng rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        Matrix w(d, k);
        for (double& v : w.data()) v = rng.uniform(-bound, bound);
        const std::uint64_t power_seed = Rng::mix(seed, t);
        const double s_full = spectral_norm(w, kPowerIterations, kPowerTolerance, power_seed);
        const double s_masked = spectral_norm(hadamard(mask.matrix(), w), kPowerIterations,
                                              kPowerTolerance, power_seed);
        const double ratio_full = s_full / full_limit;
        const double ratio_masked = s_masked / masked_limit;
        if (ratio_full > 1.0 + slack) ++r.violations;
        if (ratio_masked > 1.0 + slack) ++r.violations;
        r.max_ratio_full = std::max(r.max_ratio_full, ratio_full);
        r.max_ratio_masked = std::max(r.max_ratio_masked, ratio_masked);
        r.mean_ratio_full += ratio_full;
        r.mean_ratio_masked += ratio_masked;
        r.mean_masked_over_full += s_full > 0.0 ? s_masked / s_full : 0.0;
    }
    const double n = static_cast<double>(trials);
    r.mean_ratio_full /= n;
    r.mean_ratio_masked /= n;
    r.mean_masked_over_full /= n;

    const Matrix constant(d, k, bound);
    r.extremal_ratio_full = spectral_norm(constant, kPowerIterations, kPowerTolerance, seed) / full_limit;
    r.extremal_ratio_masked =
        spectral_norm(hadamard(mask.matrix(), constant), kPowerIterations, kPowerTolerance, seed) /
        masked_limit;
    return r;
}

// ---------------------------------------------------------------- t distribution

namespace {

double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIterations = 10000;
    constexpr double kEps = 1e-15;
    constexpr double kFloor = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFloor) d = kFloor;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFloor) d = kFloor;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFloor) c = kFloor;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFloor) d = kFloor;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFloor) c = kFloor;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw ArgumentError("incomplete beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError("incomplete beta: x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                             b * std::log1p(-x);
    const double front = std::exp(log_front);
    // the continued fraction converges fastest below the mean
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_tailed_p(double t, double df) {
    if (!(df > 0.0)) throw ArgumentError("student t: degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df) {
    const double tail = 0.5 * student_t_two_tailed_p(t, df);
    return t >= 0.0 ? 1.0 - tail : tail;
}

TTestReport paired_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw PairingError("paired t-test: " + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()) + " observations");
    }
    if (a.size() < 2) throw PairingError("paired t-test: need at least 2 pairs");
    const std::size_t n = a.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];

    TTestReport r;
    r.n = n;
    r.degrees_of_freedom = static_cast<double>(n - 1);
    r.mean_diff = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : diff) ss += (v - r.mean_diff) * (v - r.mean_diff);
    r.std_diff = std::sqrt(ss / static_cast<double>(n - 1));
    // zero spread, up to rounding of the mean
    if (r.std_diff <= 1e-14 * std::max(1.0, std::abs(r.mean_diff))) {
        throw DegenerateTestError("paired t-test: differences have zero variance (mean difference " +
                                      std::to_string(r.mean_diff) + ")",
                                  r.mean_diff);
    }
    r.t_statistic = r.mean_diff / (r.std_diff / std::sqrt(static_cast<double>(n)));
    r.p_value = student_t_two_tailed_p(r.t_statistic, r.degrees_of_freedom);
    r.significant = r.p_value < kSignificanceLevel;
    return r;
}

// ---------------------------------------------------------------- summaries

double quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ArgumentError("quantile: empty input");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Summary aggregate(std::span<const double> values) {
    if (values.empty()) throw ArgumentError("aggregate: no results");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    Summary s;
    s.n = sorted.size();
    s.single = s.n == 1;
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(s.n);
    if (!s.single) {
        double ss = 0.0;
        for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    s.min = sorted.front();
    s.max = sorted.back();
    s.q1 = quantile(sorted, 0.25);
    s.median = quantile(sorted, 0.5);
    s.q3 = quantile(sorted, 0.75);
    const double iqr = s.q3 - s.q1;
    for (double v : sorted)
        if (v < s.q1 - 1.5 * iqr || v > s.q3 + 1.5 * iqr) s.outliers.push_back(v);
    return s;
}

Summary aggregate(std::span<const RunResult> results) {
    std::vector<double> acc;
    acc.reserve(results.size());
    for (const auto& r : results) acc.push_back(r.test_acc);
    return aggregate(acc);
}

}  // namespace oslnet
