#pragma once
#include <optional>
#include <string>
#include <vector>

#include <blocksel/blockmodel.hpp>
#include <blocksel/groups.hpp>
#include <blocksel/linalg.hpp>
#include <blocksel/solver.hpp>

namespace blocksel {

enum class Method
{
    nbslasso,
    lasso,
    enet,
    single_block_ols,
    single_block_screened,
};

std::string method_name(Method m);
/// Accepts the names produced by method_name; throws ConfigError otherwise.
Method parse_method(const std::string& name);

/// Column statistics used to map standardized coefficients back to data units.
struct StandardizationInfo
{
    Vector x_centers;
    Vector x_scales;
    Vector y_centers;
    Vector y_scales;
};

/// b_raw(a, q) = b(a, q) * y_scale(q) / x_scale(a).
Matrix unstandardize_coefficients(const Matrix& B, const StandardizationInfo& info);
/// Intercepts matching unstandardize_coefficients: y_center - x_center' b_raw.
Vector unstandardized_intercepts(const Matrix& B_raw, const StandardizationInfo& info);

struct FitResult
{
    Matrix coefficients;  ///< P x Q on the standardized scale
    IndicatorMatrix indicator;
    Method method = Method::nbslasso;
    std::vector<double> lambda_used;
    double elapsed_seconds = 0.0;
    std::optional<StandardizationInfo> standardization;
    std::optional<Matrix> r2bar;  ///< block scores when a selection step ran
    std::vector<std::string> warnings;
};

/// OLS on a single full-rank block, multiplied by the block indicator at gamma.
FitResult single_block_ols(const Eigen::Ref<const Matrix>& X1, const Eigen::Ref<const Matrix>& Y1, double gamma);

/// Lasso-screened support, OLS on it, multiplied by the block indicator at gamma.
FitResult single_block_screened(const Eigen::Ref<const Matrix>& X1, const Eigen::Ref<const Matrix>& Y1, double gamma,
                                const ScreenPolicy& screen = {});

struct NbsOptions
{
    double alpha = default_alpha;
    ScreenPolicy screen{};
    PenaltySpec pen{};
    LambdaSelection lambda{};
};

/**
 * Two-step estimator. Step 1 scores every block and picks the indicator with
 * select_threshold; step 2 fits each response column by lasso restricted to
 * the covariate groups selected for its response group. Blocks outside the
 * selection are exactly zero.
 */
FitResult nbslasso_fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y, const GroupSpec& g,
                       const NbsOptions& opts = {});

inline constexpr double default_enet_mix = 0.5;

struct BaselineOptions
{
    PenaltySpec pen{};  ///< pen.mix is overridden: 1 for lasso, enet_mix for enet
    double enet_mix = default_enet_mix;
    LambdaSelection lambda{};
};

/// Unrestricted per-column lasso or elastic net; block indicator read off the nonzero pattern.
FitResult baseline_fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y, const GroupSpec& g,
                       Method method, const BaselineOptions& opts = {});

} // namespace blocksel
