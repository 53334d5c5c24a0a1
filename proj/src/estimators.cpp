#include <blocksel/estimators.hpp>
#include <blocksel/errors.hpp>

#include <chrono>

namespace blocksel {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start)
{
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

void check_rows(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y)
{
    if (X.rows() != Y.rows()) {
        throw DimensionError("X has " + std::to_string(X.rows()) + " rows but Y has " + std::to_string(Y.rows()));
    }
}

} // namespace

std::string method_name(Method m)
{
    switch (m) {
    case Method::nbslasso: return "nbslasso";
    case Method::lasso: return "lasso";
    case Method::enet: return "enet";
    case Method::single_block_ols: return "single_block_ols";
    case Method::single_block_screened: return "single_block_screened";
    }
    return "unknown";
}

Method parse_method(const std::string& name)
{
    for (Method m : {Method::nbslasso, Method::lasso, Method::enet, Method::single_block_ols,
                     Method::single_block_screened}) {
        if (method_name(m) == name) return m;
    }
    throw ConfigError("unknown method '" + name + "'");
}

Matrix unstandardize_coefficients(const Matrix& B, const StandardizationInfo& info)
{
    if (info.x_scales.size() != B.rows() || info.y_scales.size() != B.cols()) {
        throw DimensionError("standardization statistics do not match the coefficient matrix");
    }
    Matrix raw = B;
    for (Index q = 0; q < B.cols(); ++q) {
        raw.col(q) = B.col(q).cwiseQuotient(info.x_scales) * info.y_scales(q);
    }
    return raw;
}

Vector unstandardized_intercepts(const Matrix& B_raw, const StandardizationInfo& info)
{
    return info.y_centers - B_raw.transpose() * info.x_centers;
}

FitResult single_block_ols(const Eigen::Ref<const Matrix>& X1, const Eigen::Ref<const Matrix>& Y1, double gamma)
{
    check_rows(X1, Y1);
    const auto start = clock_type::now();
    ScreenPolicy never;
    never.mode = ScreenMode::never;
    const BlockStats s = block_stats(X1, Y1, never);

    FitResult res;
    res.method = Method::single_block_ols;
    Matrix r2(1, 1);
    r2(0, 0) = s.r2bar;
    res.indicator = indicator_from_gamma(r2, gamma);
    res.r2bar = r2;

    Matrix ols;
    if (s.rank_deficient) {
        res.warnings.push_back("design is rank deficient; using the minimum-norm least-squares solution");
        ols = Eigen::CompleteOrthogonalDecomposition<Matrix>(X1).solve(Y1);
    } else {
        ols = ols_solve(thin_qr(X1), Y1);
    }
    res.coefficients = res.indicator.delta(0, 0) != 0 ? ols : Matrix::Zero(X1.cols(), Y1.cols());
    res.elapsed_seconds = seconds_since(start);
    return res;
}

FitResult single_block_screened(const Eigen::Ref<const Matrix>& X1, const Eigen::Ref<const Matrix>& Y1, double gamma,
                                const ScreenPolicy& screen)
{
    check_rows(X1, Y1);
    const auto start = clock_type::now();
    ScreenPolicy policy = screen;
    policy.mode = ScreenMode::always;
    const BlockStats s = block_stats(X1, Y1, policy);

    FitResult res;
    res.method = Method::single_block_screened;
    Matrix r2(1, 1);
    r2(0, 0) = s.r2bar;
    res.indicator = indicator_from_gamma(r2, gamma);
    res.r2bar = r2;
    res.coefficients = Matrix::Zero(X1.cols(), Y1.cols());

    const IndexList& support = *s.screened_support;
    if (support.empty()) {
        res.warnings.push_back("screening selected no covariates");
    } else if (res.indicator.delta(0, 0) != 0) {
        const Matrix sub = ols_solve(thin_qr(select_columns(X1, support)), Y1);
        for (std::size_t i = 0; i < support.size(); ++i) {
            res.coefficients.row(support[i]) = sub.row(static_cast<Index>(i));
        }
    }
    res.elapsed_seconds = seconds_since(start);
    return res;
}

FitResult nbslasso_fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y, const GroupSpec& g,
                       const NbsOptions& opts)
{
    check_rows(X, Y);
    g.check_against(X.cols(), Y.cols());
    const auto start = clock_type::now();

    const BlockGrid grid = all_block_stats(X, Y, g, opts.screen);
    FitResult res;
    res.method = Method::nbslasso;
    res.r2bar = grid.r2bar();
    res.indicator = select_threshold(*res.r2bar, opts.alpha);

    std::vector<IndexList> masks(static_cast<std::size_t>(g.Q()));
    for (Index j = 0; j < g.J(); ++j) {
        IndexList allowed;
        for (Index k = 0; k < g.K(); ++k) {
            if (res.indicator.delta(k, j) == 0) continue;
            const ColumnRange cr = g.covariate_range(k);
            for (Index a = cr.start; a < cr.start + cr.size; ++a) allowed.push_back(a);
        }
        const ColumnRange rr = g.response_range(j);
        for (Index q = rr.start; q < rr.start + rr.size; ++q) masks[static_cast<std::size_t>(q)] = allowed;
    }

    if (res.indicator.selected() == 0) {
        res.warnings.push_back("no block passed ER <= alpha; coefficient matrix is zero");
    }

    const MultiResponseFit fit = multi_response_lasso(X, Y, opts.pen, masks, opts.lambda);
    res.coefficients = fit.coefficients;
    res.lambda_used = fit.lambdas;
    for (std::size_t q = 0; q < fit.converged.size(); ++q) {
        if (!fit.converged[q]) {
            res.warnings.push_back("lasso for response column " + std::to_string(q + 1) + " did not converge");
        }
    }
    res.elapsed_seconds = seconds_since(start);
    return res;
}

FitResult baseline_fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y, const GroupSpec& g,
                       Method method, const BaselineOptions& opts)
{
    check_rows(X, Y);
    g.check_against(X.cols(), Y.cols());
    if (method != Method::lasso && method != Method::enet) {
        throw ConfigError("baseline_fit supports lasso and enet only");
    }
    const auto start = clock_type::now();
    PenaltySpec pen = opts.pen;
    pen.mix = method == Method::lasso ? 1.0 : opts.enet_mix;

    const MultiResponseFit fit = multi_response_lasso(X, Y, pen, {}, opts.lambda);
    FitResult res;
    res.method = method;
    res.coefficients = fit.coefficients;
    res.lambda_used = fit.lambdas;
    res.indicator = indicator_from_pattern(block_pattern(res.coefficients, g));
    for (std::size_t q = 0; q < fit.converged.size(); ++q) {
        if (!fit.converged[q]) {
            res.warnings.push_back("fit for response column " + std::to_string(q + 1) + " did not converge");
        }
    }
    res.elapsed_seconds = seconds_since(start);
    return res;
}

} // namespace blocksel
