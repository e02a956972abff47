#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oslnet/linalg.hpp"
#include "oslnet/training.hpp"

namespace oslnet {

// k × k angles in degrees between classifier weight columns.
struct AngleMatrix {
    Matrix degrees;

    // Off-diagonal entries above the diagonal, row by row.
    std::vector<double> upper_triangle() const;
};

// Throws DegenerateWeightsError naming the first zero-norm column.
AngleMatrix angle_matrix(const Matrix& weights);

struct NormBoundReport {
    std::size_t d = 0;
    std::size_t k = 0;
    double bound = 0.0;
    std::size_t trials = 0;
    // σ_max(M⊙W) / (√d·B) and σ_max(W) / (√(dk)·B), worst case over trials.
    double max_ratio_masked = 0.0;
    double max_ratio_full = 0.0;
    double mean_ratio_masked = 0.0;
    double mean_ratio_full = 0.0;
    // Mean of σ_max(M⊙W) / σ_max(W) over trials.
    double mean_masked_over_full = 0.0;
    std::size_t violations = 0;
    // Constant-B matrix: full ratio is exactly 1, masked ratio is the
    // largest block's √(block/d).
    double extremal_ratio_full = 0.0;
    double extremal_ratio_masked = 0.0;
};

// Samples W with i.i.d. entries uniform in [−B, B] and checks
// σ_max(M⊙W) ≤ √d·B and σ_max(W) ≤ √(dk)·B on every trial.
NormBoundReport verify_norm_bounds(std::size_t d, std::size_t k, double bound, std::size_t trials,
                                   std::uint64_t seed);

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
// CDF of Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);
// P(|T| ≥ |t|).
double student_t_two_tailed_p(double t, double df);

inline constexpr double kSignificanceLevel = 0.05;

struct TTestReport {
    std::size_t n = 0;
    double mean_diff = 0.0;
    double std_diff = 0.0;
    double t_statistic = 0.0;
    double degrees_of_freedom = 0.0;
    double p_value = 1.0;
    bool significant = false;
};

// Paired two-tailed t-test on a − b. Throws PairingError on unequal lengths
// or n < 2, DegenerateTestError when the differences have zero variance.
TTestReport paired_ttest(std::span<const double> a, std::span<const double> b);

struct Summary {
    std::size_t n = 0;
    bool single = false;  // n == 1, std reported as 0
    double mean = 0.0;
    double std = 0.0;  // sample std, n − 1 denominator
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    // Values beyond 1.5 × IQR from the quartiles.
    std::vector<double> outliers;
};

// Linear interpolation between closest ranks, position p·(n−1).
double quantile(std::span<const double> sorted, double p);
Summary aggregate(std::span<const double> values);
// Summary of test accuracies.
Summary aggregate(std::span<const RunResult> results);

}  // namespace oslnet
