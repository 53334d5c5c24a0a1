#include <doctest.h>

#include <cmath>
#include <string>

#include <blocksel/errors.hpp>
#include <blocksel/simbench.hpp>

using namespace blocksel;

namespace {

SimulationSpec small_spec()
{
    SimulationSpec s;
    s.n = 60;
    s.P = 40;
    s.Q = 40;
    s.group_size = 10;
    s.n_test = 200;
    return s;
}

} // namespace

TEST_SUITE("simbench")
{
    TEST_CASE("active blocks carry the rounded nonzero count")
    {
        CHECK(active_block_nonzeros(20, 20, 90.0) == 40);
        CHECK(active_block_nonzeros(20, 20, 30.0) == 280);
        CHECK(active_block_nonzeros(1, 1, 90.0) == 1);

        SimulationSpec s = small_spec();
        s.group_size = 20;
        s.kj_choices = {1, 2};
        s.sparsity = 90.0;
        const SimulatedData d = generate(s);
        for (Index k = 0; k < d.groups.K(); ++k) {
            for (Index j = 0; j < d.groups.J(); ++j) {
                const ColumnRange cr = d.groups.covariate_range(k);
                const ColumnRange rr = d.groups.response_range(j);
                const auto nz = (d.truth.B.block(cr.start, rr.start, cr.size, rr.size).array() != 0.0).count();
                CHECK(nz == (d.truth.delta(k, j) ? 40 : 0));
            }
        }
    }

    TEST_CASE("fixed K_j activates exactly K_j blocks per response group")
    {
        SimulationSpec s = small_spec();
        s.kj_law = KjLaw::fixed;
        s.kj_fixed = 2;
        const SimulatedData d = generate(s);
        for (Index j = 0; j < d.groups.J(); ++j) CHECK(d.truth.delta.col(j).sum() == 2);
        CHECK(d.truth.delta == block_pattern(d.truth.B, d.groups));
        CHECK(static_cast<Index>(d.truth.nonzero_entries.size()) == (d.truth.B.array() != 0.0).count());
    }

    TEST_CASE("coefficient magnitudes lie in the configured range")
    {
        const SimulatedData d = generate(small_spec());
        for (Index i = 0; i < d.truth.B.size(); ++i) {
            const double v = std::abs(d.truth.B(i));
            CHECK((v == 0.0 || (v >= 1.0 && v <= 5.0)));
        }
    }

    TEST_CASE("adjacent covariates correlate at 0.5")
    {
        SimulationSpec s = small_spec();
        s.n = 5000;
        s.P = 10;
        s.Q = 10;
        s.group_size = 5;
        s.kj_choices = {1};
        const SimulatedData d = generate(s);
        const Matrix& X = d.X_train;
        for (Index a = 0; a + 1 < 10; ++a) {
            const double r = X.col(a).dot(X.col(a + 1)) / 4999.0;
            CHECK(std::abs(r - 0.5) < 0.05);
        }
        const double r2 = X.col(0).dot(X.col(2)) / 4999.0;
        CHECK(std::abs(r2 - 0.25) < 0.05);
    }

    TEST_CASE("generation is deterministic for a seed")
    {
        const SimulatedData a = generate(small_spec());
        const SimulatedData b = generate(small_spec());
        CHECK((a.X_train.array() == b.X_train.array()).all());
        CHECK((a.Y_test.array() == b.Y_test.array()).all());
        CHECK((a.truth.B.array() == b.truth.B.array()).all());
        SimulationSpec other = small_spec();
        other.seed = 2;
        CHECK_FALSE((generate(other).truth.B.array() == a.truth.B.array()).all());
    }

    TEST_CASE("training data is standardized, test data uses training statistics")
    {
        const SimulatedData d = generate(small_spec());
        CHECK(d.X_train.rows() == 60);
        CHECK(d.X_test.rows() == 200);
        CHECK(d.X_train.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(d.Y_train.col(0).squaredNorm() / 59.0 - 1.0) < 1e-12);
        CHECK(d.X_test.colwise().mean().cwiseAbs().maxCoeff() > 1e-6);
    }

    TEST_CASE("group settings")
    {
        SimulationSpec s;
        s.group_setting = GroupSetting::unequal_pattern;
        const GroupSpec g = s.groups();
        CHECK(g.covariate_sizes() == std::vector<Index>{20, 30, 20, 30, 20, 30, 20, 30});
        s.P = 210;
        CHECK(s.groups().covariate_sizes().back() == 10);

        SimulationSpec e = small_spec();
        e.group_setting = GroupSetting::explicit_sizes;
        e.covariate_sizes = {10, 30};
        e.response_sizes = {40};
        CHECK(e.groups().K() == 2);
        e.response_sizes = {30};
        CHECK_THROWS_AS(e.validate(), ConfigError);
    }

    TEST_CASE("spec validation")
    {
        SimulationSpec s = small_spec();
        s.kj_law = KjLaw::fixed;
        s.kj_fixed = 5;
        CHECK_THROWS_AS(generate(s), ConfigError);
        s = small_spec();
        s.sparsity = 100.0;
        CHECK_THROWS_AS(s.validate(), ConfigError);
        s = small_spec();
        s.kj_choices = {2, 9};
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }

    TEST_CASE("spec json round trip")
    {
        SimulationSpec s = small_spec();
        s.kj_law = KjLaw::fixed;
        s.kj_fixed = 3;
        s.sparsity = 60.0;
        const SimulationSpec back = simulation_spec_from_json(simulation_spec_to_json(s));
        CHECK(back.n == 60);
        CHECK(back.kj_law == KjLaw::fixed);
        CHECK(back.kj_fixed == 3);
        CHECK(back.sparsity == 60.0);
        CHECK(back.group_size == 10);
        CHECK_THROWS_AS(simulation_spec_from_json("[1]"), ConfigError);
        CHECK_THROWS_AS(simulation_spec_from_json(R"({"group_setting":"odd"})"), ConfigError);
        CHECK_THROWS_AS(simulation_spec_from_json(R"({"n":"many"})"), ConfigError);
    }

    TEST_CASE("evaluate: exact and empty estimates")
    {
        const SimulatedData d = generate(small_spec());
        FitResult exact;
        exact.coefficients = d.truth.B;
        const MetricsReport r = evaluate(exact, d.truth, d.X_test, d.Y_test, d.groups);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.pdr == 1.0);
        CHECK(r.fdr == 0.0);
        CHECK(r.l1 == 0.0);
        CHECK(r.l2 == 0.0);

        FitResult empty;
        empty.coefficients = Matrix::Zero(40, 40);
        const MetricsReport z = evaluate(empty, d.truth, d.X_test, d.Y_test, d.groups);
        CHECK(z.recall == 0.0);
        CHECK(z.precision == 1.0);
        CHECK(z.nne == 0);
        CHECK(z.fdr == 0.0);
        CHECK(z.test_mse == doctest::Approx(d.Y_test.squaredNorm() / (200.0 * 40.0)));
        CHECK(z.l1 >= z.l2);
    }

    TEST_CASE("evaluate: one wrong block out of two selected")
    {
        GroundTruth t;
        t.B = Matrix::Zero(4, 4);
        t.B(0, 0) = 2.0;
        t.delta = Eigen::MatrixXi::Zero(2, 2);
        t.delta(0, 0) = 1;
        t.nonzero_entries = {0};
        const GroupSpec g({2, 2}, {2, 2});
        FitResult f;
        f.coefficients = Matrix::Zero(4, 4);
        f.coefficients(0, 0) = 1.5;
        f.coefficients(3, 3) = 0.5;
        const MetricsReport r = evaluate(f, t, Matrix::Zero(3, 4), Matrix::Zero(3, 4), g);
        CHECK(r.precision == 0.5);
        CHECK(r.recall == 1.0);
        CHECK(r.nne == 2);
        CHECK(r.fdr == 0.5);
        CHECK(r.pdr == 1.0);
        CHECK(r.l1 == doctest::Approx(1.0));
        CHECK(r.l2 == doctest::Approx(std::sqrt(0.5)));
        CHECK_THROWS_AS(evaluate(f, t, Matrix::Zero(3, 5), Matrix::Zero(3, 4), g), DimensionError);
    }

    TEST_CASE("benchmark: single replication, determinism and table layout")
    {
        const SimulationSpec s = small_spec();
        const BenchmarkResult a = run_benchmark(s, {Method::nbslasso, Method::lasso}, 1, 11);
        REQUIRE(a.reports.size() == 2);
        REQUIRE(a.aggregate.size() == 2);
        CHECK(a.reports[0].ok);
        CHECK(a.reports[0].seed == 11);
        CHECK(a.aggregate[0].precision.mean == a.reports[0].precision);
        CHECK(a.aggregate[0].precision.sd == 0.0);
        for (const MetricsReport& r : a.reports) {
            for (double v : {r.precision, r.recall, r.pdr, r.fdr}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
            CHECK(r.l1 >= r.l2);
        }

        const BenchmarkResult b = run_benchmark(s, {Method::nbslasso, Method::lasso}, 1, 11);
        CHECK(replications_csv(a.reports).size() > 0);
        CHECK(a.reports[1].l2 == b.reports[1].l2);
        CHECK(a.reports[0].test_mse == b.reports[0].test_mse);

        const std::string table = aggregate_table(a.aggregate);
        const std::string header = table.substr(0, table.find('\n'));
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (pos < header.size()) {
            const std::size_t start = header.find_first_not_of(' ', pos);
            if (start == std::string::npos) break;
            const std::size_t end = header.find(' ', start);
            cols.push_back(header.substr(start, end - start));
            pos = end;
        }
        CHECK(cols == std::vector<std::string>{"Sparsity", "Method", "TestMSE", "Precision", "Recall", "L1", "L2", "PDR",
                                               "FDR", "Time(s)"});
        CHECK(table.find("NBSlasso") != std::string::npos);
        CHECK(table.find("Lasso") != std::string::npos);
    }

    TEST_CASE("benchmark records failures without throwing")
    {
        const BenchmarkResult r = run_benchmark(small_spec(), {Method::single_block_ols}, 2, 1);
        REQUIRE(r.reports.size() == 2);
        CHECK_FALSE(r.reports[0].ok);
        CHECK_FALSE(r.reports[0].error.empty());
        CHECK(r.aggregate[0].failures == 2);
        CHECK(r.aggregate[0].count == 0);
        CHECK_THROWS_AS(run_benchmark(small_spec(), {Method::lasso}, 0, 1), ConfigError);
    }

    TEST_CASE("aggregate uses the sample standard deviation")
    {
        std::vector<MetricsReport> reps(3);
        for (int i = 0; i < 3; ++i) {
            reps[static_cast<std::size_t>(i)].method = "lasso";
            reps[static_cast<std::size_t>(i)].test_mse = i + 1.0;
        }
        const auto agg = aggregate_reports(reps);
        REQUIRE(agg.size() == 1);
        CHECK(agg[0].test_mse.mean == doctest::Approx(2.0));
        CHECK(agg[0].test_mse.sd == doctest::Approx(1.0));
    }
}
