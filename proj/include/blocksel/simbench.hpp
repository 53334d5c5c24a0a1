#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include <blocksel/estimators.hpp>
#include <blocksel/groups.hpp>
#include <blocksel/linalg.hpp>

namespace blocksel {

enum class GroupSetting
{
    equal,            ///< every group has group_size columns
    unequal_pattern,  ///< alternating 20, 30, 20, 30, ... (last group takes the remainder)
    explicit_sizes,
};

enum class KjLaw
{
    fixed,   ///< every response group has kj_fixed active blocks
    random,  ///< drawn uniformly from kj_choices per response group
};

struct SimulationSpec
{
    Index n = 150;
    Index P = 200;
    Index Q = 200;
    GroupSetting group_setting = GroupSetting::equal;
    Index group_size = 20;
    std::vector<Index> covariate_sizes;
    std::vector<Index> response_sizes;
    KjLaw kj_law = KjLaw::random;
    Index kj_fixed = 2;
    std::vector<Index> kj_choices{2, 3, 4};
    double sparsity = 30.0;  ///< percent of zero entries inside an active block
    double coef_low = 1.0;
    double coef_high = 5.0;
    double noise_sd = 1.0;
    double correlation = 0.5;  ///< Sigma_ab = correlation^|a-b|
    Index n_test = 1000;
    std::uint64_t seed = 1;

    GroupSpec groups() const;
    /// Throws ConfigError describing the first invalid field.
    void validate() const;
};

SimulationSpec simulation_spec_from_json(const std::string& text);
std::string simulation_spec_to_json(const SimulationSpec& spec);

/// Nonzero count inside one active p_k x q_j block.
Index active_block_nonzeros(Index pk, Index qj, double sparsity);

struct GroundTruth
{
    Matrix B;                    ///< P x Q, generation scale
    Eigen::MatrixXi delta;       ///< K x J block pattern of B
    IndexList nonzero_entries;   ///< column-major linear indices a + q * P
};

struct SimulatedData
{
    Matrix X_train;  ///< standardized with training statistics
    Matrix Y_train;
    Matrix X_test;   ///< standardized with training statistics
    Matrix Y_test;
    StandardizationInfo standardization;
    GroundTruth truth;
    GroupSpec groups;
};

/**
 * Rows of X are N(0, Sigma) with Sigma_ab = correlation^|a-b|, drawn through the
 * equivalent AR(1) recursion across columns. Y = X B + E with E iid
 * N(0, noise_sd^2). The first n rows train, the next n_test rows test.
 */
SimulatedData generate(const SimulationSpec& spec);

struct MetricsReport
{
    std::string method;
    Index replication = 0;
    std::uint64_t seed = 0;
    double sparsity = 0.0;
    double test_mse = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    double pdr = 0.0;
    double fdr = 0.0;
    Index nne = 0;
    double time_seconds = 0.0;
    bool ok = true;
    std::string error;
};

/**
 * Scores a fit against the truth. Block precision/recall use the nonzero block
 * pattern of the estimate; L1/L2 compare on the generation scale (the estimate
 * is mapped back when the fit carries standardization statistics); TestMSE is
 * on the standardized test responses.
 */
MetricsReport evaluate(const FitResult& fit, const GroundTruth& truth, const Eigen::Ref<const Matrix>& X_test,
                       const Eigen::Ref<const Matrix>& Y_test, const GroupSpec& g);

struct BenchmarkOptions
{
    NbsOptions nbs{};
    BaselineOptions baseline{};
};

struct MetricSummary
{
    double mean = 0.0;
    double sd = 0.0;
};

struct AggregateRow
{
    double sparsity = 0.0;
    std::string method;
    Index count = 0;
    Index failures = 0;
    MetricSummary test_mse, precision, recall, l1, l2, pdr, fdr, nne, time_seconds;
};

struct BenchmarkResult
{
    std::vector<MetricsReport> reports;
    std::vector<AggregateRow> aggregate;
};

/// Fits one method on generated data with seeds derived from the data seed.
FitResult fit_method(Method method, const SimulatedData& data, std::uint64_t seed, const BenchmarkOptions& opts);

/// Replication r uses seed base_seed + r. Failures are recorded, not thrown.
BenchmarkResult run_benchmark(const SimulationSpec& spec, const std::vector<Method>& methods, Index replications,
                              std::uint64_t base_seed, const BenchmarkOptions& opts = {});

/// Mean and sample sd (0 for a single replication) per method, failures excluded.
std::vector<AggregateRow> aggregate_reports(const std::vector<MetricsReport>& reports);

/// Table display name: NBSlasso, Lasso, ElasticNet, ...
std::string display_name(Method m);

std::string replications_csv(const std::vector<MetricsReport>& reports);
/// Columns: Sparsity, Method, TestMSE, Precision, Recall, L1, L2, PDR, FDR, Time(s); cells are mean(sd).
std::string aggregate_table(const std::vector<AggregateRow>& rows);

} // namespace blocksel
