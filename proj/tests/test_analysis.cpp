#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "oslnet/analysis.hpp"
#include "oslnet/errors.hpp"

using namespace oslnet;

TEST_SUITE("analysis") {
    TEST_CASE("incomplete beta special values") {
        CHECK(regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
        CHECK(regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
        // I_x(1, 1) = x and I_x(a, 1) = x^a
        CHECK(regularized_incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-14));
        CHECK(regularized_incomplete_beta(2.5, 1.0, 0.6) == doctest::Approx(std::pow(0.6, 2.5)).epsilon(1e-13));
        // symmetry I_x(a, b) = 1 − I_{1−x}(b, a)
        CHECK(regularized_incomplete_beta(3.0, 7.0, 0.2) ==
              doctest::Approx(1.0 - regularized_incomplete_beta(7.0, 3.0, 0.8)).epsilon(1e-13));
    }

    TEST_CASE("t cdf agrees with the reference distribution") {
        for (double df : {1.0, 2.0, 3.5, 7.0, 19.0, 59.0, 200.0}) {
            for (double t = -8.0; t <= 8.0; t += 0.37) {
                CHECK(std::abs(student_t_cdf(t, df) - oracle::t_cdf(t, df)) < 1e-12);
                CHECK(std::abs(student_t_two_tailed_p(t, df) - oracle::t_two_tailed(t, df)) < 1e-12);
            }
        }
        CHECK(student_t_cdf(0.0, 5.0) == 0.5);
        // df = 1 is Cauchy
        CHECK(student_t_cdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-14));
    }

    TEST_CASE("two-tailed p at critical values from the t table") {
        struct Row {
            double df, alpha, table_value;
        };
        // three-decimal entries of a printed t table
        const Row rows[] = {{19, 0.05, 2.093}, {19, 0.005, 3.174}, {59, 0.05, 2.001}, {59, 0.005, 2.916}};
        for (const auto& r : rows) {
            const double exact = oracle::t_critical(r.alpha, r.df);
            CHECK(std::abs(exact - r.table_value) < 5e-4);
            CHECK(std::abs(student_t_two_tailed_p(exact, r.df) - r.alpha) < 1e-6);
            CHECK(std::abs(student_t_two_tailed_p(r.table_value, r.df) - r.alpha) < 2e-4);
        }
    }

    TEST_CASE("paired t-test on a hand example") {
        const std::vector<double> a{0.91, 0.90, 0.93, 0.89, 0.92};
        const std::vector<double> b{0.88, 0.90, 0.90, 0.87, 0.91};
        const TTestReport r = paired_ttest(a, b);
        CHECK(r.n == 5);
        CHECK(r.degrees_of_freedom == 4.0);
        CHECK(r.t_statistic == doctest::Approx(3.086974532565159).epsilon(1e-12));
        CHECK(r.p_value == doctest::Approx(0.03668198940044108).epsilon(1e-9));
        CHECK(r.significant);
        CHECK(r.mean_diff == doctest::Approx(0.018));
    }

    TEST_CASE("paired t-test against the textbook formula on random data") {
        Rng rng(50);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 2 + rng.below(60);
            std::vector<double> a(n), b(n);
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = 0.9 + 0.01 * rng.normal();
                b[i] = 0.9 + 0.01 * rng.normal() + 0.003;
            }
            const TTestReport r = paired_ttest(a, b);
            const double t = oracle::paired_t(a, b);
            CHECK(r.t_statistic == doctest::Approx(t).epsilon(1e-10));
            CHECK(std::abs(r.p_value - oracle::t_two_tailed(t, static_cast<double>(n - 1))) < 1e-9);
            CHECK(r.significant == (r.p_value < 0.05));
            // swapping the arms flips t and keeps p
            const TTestReport s = paired_ttest(b, a);
            CHECK(s.t_statistic == doctest::Approx(-r.t_statistic));
            CHECK(s.p_value == doctest::Approx(r.p_value));
        }
    }

    TEST_CASE("paired t-test errors") {
        const std::vector<double> a{1, 2, 3}, b{1, 2};
        CHECK_THROWS_AS(paired_ttest(a, b), PairingError);
        const std::vector<double> one{1};
        CHECK_THROWS_AS(paired_ttest(one, one), PairingError);
        CHECK_THROWS_AS(paired_ttest(a, a), DegenerateTestError);
        const std::vector<double> shifted{2, 3, 4};
        try {
            paired_ttest(shifted, a);
            FAIL("expected DegenerateTestError");
        } catch (const DegenerateTestError& e) {
            CHECK(e.mean_diff == 1.0);
        }
    }

    TEST_CASE("angle matrix") {
        const Matrix w{{1, 0, 1}, {0, 1, 1}};
        const AngleMatrix a = angle_matrix(w);
        CHECK(a.degrees(0, 1) == 90.0);
        CHECK(a.degrees(0, 2) == doctest::Approx(45.0));
        CHECK(a.degrees(1, 1) == 0.0);
        CHECK(a.upper_triangle().size() == 3);
        const Matrix dead{{1, 0}, {0, 0}};
        try {
            angle_matrix(dead);
            FAIL("expected DegenerateWeightsError");
        } catch (const DegenerateWeightsError& e) {
            CHECK(e.class_index == 1);
        }
        // clamping keeps parallel columns at exactly 0°
        const Matrix parallel{{0.1, 0.3}, {0.7, 2.1}};
        CHECK(angle_matrix(parallel).degrees(0, 1) == doctest::Approx(0.0).epsilon(1e-6));
    }

    TEST_CASE("norm bounds hold and the constant matrix is extremal") {
        const NormBoundReport r = verify_norm_bounds(32, 8, 1.0, 200, 1);
        CHECK(r.violations == 0);
        CHECK(r.max_ratio_masked <= 1.0);
        CHECK(r.max_ratio_full <= 1.0);
        CHECK(std::abs(r.extremal_ratio_full - 1.0) < 1e-9);
        // equal 4-row blocks: σ(M⊙B) = 2, bound √32
        CHECK(r.extremal_ratio_masked == doctest::Approx(2.0 / std::sqrt(32.0)).epsilon(1e-9));
        CHECK(r.mean_masked_over_full < 1.0);
        const NormBoundReport one = verify_norm_bounds(9, 3, 0.5, 1, 0);
        CHECK(one.violations == 0);
        CHECK(one.trials == 1);
    }

    TEST_CASE("norm bound ratios agree with the SVD") {
        // recompute one trial's norms independently
        Rng rng(51);
        for (int trial = 0; trial < 10; ++trial) {
            Matrix w(12, 4);
            for (double& v : w.data()) v = rng.uniform(-1.0, 1.0);
            CHECK(std::abs(spectral_norm(w) - oracle::largest_singular_value(w)) < 1e-8);
            CHECK(oracle::largest_singular_value(w) <= std::sqrt(48.0));
        }
    }

    TEST_CASE("quantiles and summary") {
        const std::vector<double> s{1, 2, 3, 4};
        CHECK(quantile(s, 0.0) == 1.0);
        CHECK(quantile(s, 0.5) == 2.5);
        CHECK(quantile(s, 0.25) == doctest::Approx(1.75));
        CHECK(quantile(s, 1.0) == 4.0);

        const std::vector<double> v{0.9, 0.91, 0.89, 0.92, 0.5};
        const Summary sum = aggregate(v);
        CHECK(sum.n == 5);
        CHECK(sum.mean == doctest::Approx(0.824));
        CHECK(sum.median == doctest::Approx(0.9));
        CHECK(sum.outliers == std::vector<double>{0.5});
        double ss = 0.0;
        for (double x : v) ss += (x - 0.824) * (x - 0.824);
        CHECK(sum.std == doctest::Approx(std::sqrt(ss / 4.0)));

        const std::vector<double> single{0.7};
        const Summary one = aggregate(single);
        CHECK(one.single);
        CHECK(one.std == 0.0);
        CHECK_THROWS(aggregate(std::vector<double>{}));
    }
}
