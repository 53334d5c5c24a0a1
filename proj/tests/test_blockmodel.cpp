#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <blocksel/blockmodel.hpp>
#include <blocksel/errors.hpp>

#include "test_util.hpp"

using namespace blocksel;
using testutil::gaussian;

namespace {

// Smallest candidate c in (0,1) whose bound is feasible, by checking every grid value directly.
double exhaustive_first_feasible(const std::vector<double>& v, double alpha)
{
    double best = std::numeric_limits<double>::quiet_NaN();
    for (double c : v) {
        if (!(c > 0.0 && c < 1.0)) continue;
        double num = 0.0, den = 0.0;
        for (double r : v) {
            num += r < 2.0 * c / (c - 1.0) ? 1.0 : 0.0;
            den += r > c ? 1.0 : 0.0;
        }
        if (den > 0.0 && num / den <= alpha && !(c >= best)) best = c;
    }
    return best;
}

Matrix as_grid(const std::vector<double>& v, Index K)
{
    Matrix m(K, static_cast<Index>(v.size()) / K);
    for (Index i = 0; i < m.size(); ++i) m(i % K, i / K) = v[static_cast<std::size_t>(i)];
    return m;
}

} // namespace

TEST_SUITE("blockmodel")
{
    TEST_CASE("noise-free block is a perfect fit")
    {
        const Matrix X = gaussian(20, 3, 1);
        const Matrix Y = X * gaussian(3, 2, 2);
        const BlockStats s = block_stats(X, Y);
        CHECK(s.rss < 1e-20 * Y.squaredNorm());
        CHECK(std::abs(s.l) < 1e-12);
        CHECK(s.r2bar == doctest::Approx(1.0));
        CHECK(s.effective_p == 3);
    }

    TEST_CASE("block orthogonal to the span has the sentinel score")
    {
        const Matrix X = gaussian(20, 3, 3);
        const Matrix Z = gaussian(20, 2, 4);
        const Matrix Y = Z - testutil::dense_projector(X) * Z;
        const BlockStats s = block_stats(X, Y);
        CHECK(std::isinf(s.l));
        CHECK(s.l > 0);
        CHECK(std::isinf(s.r2bar));
        CHECK(s.r2bar < 0);
    }

    TEST_CASE("l matches the dense projector oracle")
    {
        const Matrix X = gaussian(10, 3, 5);
        const Matrix Y = gaussian(10, 2, 6);
        const Matrix P = testutil::dense_projector(X);
        const double fit = (P * Y).squaredNorm();
        const double rss = (Y - P * Y).squaredNorm();
        const double oracle = (rss / (10.0 - 3.0 - 1.0)) * ((3.0 - 1.0) / fit);
        const BlockStats s = block_stats(X, Y);
        CHECK(std::abs(s.l - oracle) < 1e-10);
        CHECK(std::abs(s.rss + s.fit - Y.squaredNorm()) < 1e-8 * Y.squaredNorm());
        CHECK(s.r2bar == doctest::Approx(1.0 - s.l));
    }

    TEST_CASE("single-column blocks use a unit numerator weight")
    {
        const Matrix X = gaussian(12, 1, 7);
        const Matrix Y = gaussian(12, 1, 8);
        const Matrix P = testutil::dense_projector(X);
        const double oracle = ((Y - P * Y).squaredNorm() / 10.0) / (P * Y).squaredNorm();
        CHECK(std::abs(block_stats(X, Y).l - oracle) < 1e-10);
    }

    TEST_CASE("wide blocks are screened and capped")
    {
        const Matrix X = testutil::standardized_gaussian(30, 60, 9);
        const Matrix Y = standardize(X.col(5) * 3.0 - X.col(40) * 2.0 + gaussian(30, 1, 10)).data;
        const BlockStats s = block_stats(X, Y);
        REQUIRE(s.screened_support.has_value());
        CHECK(s.effective_p <= 27);
        CHECK(s.effective_p == static_cast<Index>(s.screened_support->size()));
        CHECK(std::count(s.screened_support->begin(), s.screened_support->end(), 5) == 1);
        CHECK(std::count(s.screened_support->begin(), s.screened_support->end(), 40) == 1);

        ScreenPolicy never;
        never.mode = ScreenMode::never;
        CHECK_THROWS_AS(block_stats(X, Y, never), ConfigError);
    }

    TEST_CASE("forced screening on a narrow block")
    {
        const Matrix X = testutil::standardized_gaussian(40, 6, 11);
        const Matrix Y = standardize(X.col(2) * 2.0 + gaussian(40, 1, 12)).data;
        ScreenPolicy always;
        always.mode = ScreenMode::always;
        const BlockStats s = block_stats(X, Y, always);
        REQUIRE(s.screened_support.has_value());
        CHECK(std::count(s.screened_support->begin(), s.screened_support->end(), 2) == 1);
    }

    TEST_CASE("cap binding keeps the support at n - 3")
    {
        const Matrix X = testutil::standardized_gaussian(12, 40, 13);
        const Matrix Y = standardize(X.leftCols(20) * Vector::Ones(20)).data;
        ScreenPolicy pol;
        const IndexList sup = screen_support(X, Y, pol, 9);
        CHECK(sup.size() <= 9);
    }

    TEST_CASE("block_stats rejects tiny samples and row mismatch")
    {
        CHECK_THROWS_AS(block_stats(gaussian(3, 1, 1), gaussian(3, 1, 2)), DimensionError);
        CHECK_THROWS_AS(block_stats(gaussian(10, 2, 1), gaussian(9, 1, 2)), DimensionError);
    }

    TEST_CASE("all_block_stats on a single block equals block_stats")
    {
        const Matrix X = gaussian(15, 3, 14);
        const Matrix Y = gaussian(15, 2, 15);
        const BlockGrid grid = all_block_stats(X, Y, GroupSpec({3}, {2}));
        CHECK(grid.K() == 1);
        CHECK(grid.at(0, 0).l == doctest::Approx(block_stats(X, Y).l).epsilon(1e-12));
    }

    TEST_CASE("2x2 grid with one signal block ranks it first")
    {
        const Matrix X = testutil::standardized_gaussian(50, 6, 16);
        Matrix Y(50, 4);
        Y.leftCols(2) = gaussian(50, 2, 17);
        Y.rightCols(2) = X.rightCols(3) * gaussian(3, 2, 18) * 3.0 + gaussian(50, 2, 19);
        const BlockGrid grid = all_block_stats(X, Y, GroupSpec({3, 3}, {2, 2}));
        const Matrix r = grid.r2bar();
        CHECK(r(1, 1) > r(0, 0));
        CHECK(r(1, 1) > r(0, 1));
        CHECK(r(1, 1) > r(1, 0));
        for (Index k = 0; k < 2; ++k) {
            for (Index j = 0; j < 2; ++j) {
                CHECK(grid.at(k, j).k == k);
                CHECK(grid.at(k, j).j == j);
            }
        }
    }

    TEST_CASE("er_bound examples")
    {
        const std::vector<double> v{0.99, 0.98, -50.0, -60.0};
        CHECK(er_bound(v, 0.5) == 1.0);
        const std::vector<double> high(5, 0.9);
        CHECK(er_bound(high, 0.5) == 0.0);
        const std::vector<double> low{0.1, 0.2};
        CHECK(std::isinf(er_bound(low, 0.5)));
        CHECK_THROWS_AS(er_bound(v, 0.0), DomainError);
        CHECK_THROWS_AS(er_bound(v, 1.0), DomainError);
    }

    TEST_CASE("select_threshold on a single block is empty")
    {
        Matrix r(1, 1);
        r(0, 0) = 0.9;
        const IndicatorMatrix ind = select_threshold(r);
        CHECK(ind.selected() == 0);
        CHECK_FALSE(ind.feasible);
        CHECK(ind.c_hat == 1.0);
    }

    TEST_CASE("select_threshold on a separated four-block grid follows the first feasible value")
    {
        // With nothing below 2c/(c-1) the bound is 0 at the smallest positive
        // value, so the scan stops at 0.01 and the back-off keeps that block.
        const std::vector<double> v{0.95, 0.94, 0.02, 0.01};
        const IndicatorMatrix ind = select_threshold(as_grid(v, 2), 0.05);
        CHECK(ind.feasible);
        CHECK(ind.c_hat == doctest::Approx(exhaustive_first_feasible(v, 0.05) - threshold_backoff));
        CHECK(ind.selected() == 4);
    }

    TEST_CASE("select_threshold skips candidates outside (0, 1)")
    {
        const std::vector<double> v{0.95, 0.9, 0.0, -0.3, -25.0, -12.0, 1.0};
        const Matrix g = as_grid(v, 7);
        const IndicatorMatrix ind = select_threshold(g, 0.5);
        const double c = exhaustive_first_feasible(v, 0.5);
        CHECK(c == 0.9);
        CHECK(ind.c_hat == c - threshold_backoff);
        CHECK(ind.selected() == 3);
        CHECK_THROWS_AS(select_threshold(g, 0.0), DomainError);
        CHECK_THROWS_AS(select_threshold(Matrix(0, 0)), DimensionError);
    }

    TEST_CASE("select_threshold matches the exhaustive scan on random grids")
    {
        std::mt19937_64 rng(77);
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_int_distribution<int> kind(0, 2);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> v(24);
            for (double& x : v) {
                switch (kind(rng)) {
                case 0: x = 0.8 + 0.15 * std::tanh(z(rng)); break;
                case 1: x = 0.1 * z(rng); break;
                default: x = -std::exp(2.0 + z(rng)); break;
                }
            }
            const double alpha = (t % 2 == 0) ? 0.05 : 0.2;
            const IndicatorMatrix ind = select_threshold(as_grid(v, 4), alpha);
            const double c = exhaustive_first_feasible(v, alpha);
            if (std::isnan(c)) {
                CHECK_FALSE(ind.feasible);
                CHECK(ind.selected() == 0);
            } else {
                CHECK(ind.feasible);
                CHECK(ind.c_hat == c - threshold_backoff);
                const auto expected = std::count_if(v.begin(), v.end(), [&](double r) { return r > c - threshold_backoff; });
                CHECK(ind.selected() == expected);
            }
        }
    }

    TEST_CASE("indicator_from_gamma")
    {
        Matrix r(2, 1);
        r << 0.9, 0.3;
        const IndicatorMatrix mid = indicator_from_gamma(r, 0.5);
        CHECK(mid.delta(0, 0) == 1);
        CHECK(mid.delta(1, 0) == 0);
        CHECK(indicator_from_gamma(r, 1.0 - 1e-12).selected() == 2);
        CHECK(indicator_from_gamma(r, 1e-12).selected() == 0);
        CHECK_THROWS_AS(indicator_from_gamma(r, 1.0), DomainError);
    }

    TEST_CASE("selected count is non-increasing in c")
    {
        const Matrix r = gaussian(6, 7, 90);
        Index prev = r.size() + 1;
        for (int i = 1; i < 1000; ++i) {
            const double c = i / 1000.0;
            const Index now = indicator_from_gamma(r, 1.0 - c).selected();
            CHECK(now <= prev);
            prev = now;
        }
    }

    TEST_CASE("block_pattern and indicator_from_pattern")
    {
        const GroupSpec g({2, 2}, {1, 2});
        Matrix B = Matrix::Zero(4, 3);
        B(3, 2) = -0.5;
        const Eigen::MatrixXi d = block_pattern(B, g);
        CHECK(d.sum() == 1);
        CHECK(d(1, 1) == 1);
        const IndicatorMatrix ind = indicator_from_pattern(d);
        REQUIRE(ind.selected() == 1);
        CHECK(ind.active[0].first == 1);
        CHECK(ind.active[0].second == 1);
        CHECK_THROWS_AS(block_pattern(Matrix::Zero(3, 3), g), DimensionError);
    }

    TEST_CASE("span and rotation invariance of l")
    {
        const Matrix X = gaussian(40, 4, 91);
        const Matrix Y = X * gaussian(4, 3, 92) + gaussian(40, 3, 93);
        const double l = block_stats(X, Y).l;
        const Matrix T = gaussian(4, 4, 94) + 3.0 * Matrix::Identity(4, 4);
        CHECK(std::abs(block_stats(X * T, Y).l - l) < 1e-8);
        const Matrix O = testutil::random_orthogonal(3, 95);
        CHECK(std::abs(block_stats(X, Y * O).l - l) < 1e-8);
    }
}
