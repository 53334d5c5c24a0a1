#include <blocksel/blockmodel.hpp>
#include <blocksel/errors.hpp>
#include <blocksel/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace blocksel {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Fitted energy below this fraction of ||Y_j||^2 counts as none.
constexpr double zero_fit_fraction = 1e-13;

void fill_ratio(BlockStats& s, Index n)
{
    const double df_rss = static_cast<double>(n - s.effective_p - 1);
    const double df_fit = static_cast<double>(std::max<Index>(s.effective_p - 1, 1));
    const double total = s.rss + s.fit;
    if (s.effective_p == 0 || !(s.fit > zero_fit_fraction * total)) {
        s.l = inf;
        s.r2bar = -inf;
        return;
    }
    s.l = (s.rss / df_rss) / (s.fit / df_fit);
    s.r2bar = 1.0 - s.l;
}

IndicatorMatrix indicator_at(const Matrix& r2bar, double c)
{
    IndicatorMatrix ind;
    ind.delta = Eigen::MatrixXi::Zero(r2bar.rows(), r2bar.cols());
    ind.c_hat = c;
    ind.gamma_hat = 1.0 - c;
    for (Index k = 0; k < r2bar.rows(); ++k) {
        for (Index j = 0; j < r2bar.cols(); ++j) {
            if (r2bar(k, j) > c) {
                ind.delta(k, j) = 1;
                ind.active.emplace_back(k, j);
            }
        }
    }
    return ind;
}

} // namespace

Matrix BlockGrid::r2bar() const
{
    Matrix m(K_, J_);
    for (Index k = 0; k < K_; ++k) {
        for (Index j = 0; j < J_; ++j) m(k, j) = at(k, j).r2bar;
    }
    return m;
}

IndexList screen_support(const Eigen::Ref<const Matrix>& Xk, const Eigen::Ref<const Matrix>& Yj,
                         const ScreenPolicy& policy, Index cap)
{
    const Index p = Xk.cols();
    const CvDesign design(Xk, policy.cv.folds, policy.cv.seed);
    Vector strength = Vector::Zero(p);
    for (Index q = 0; q < Yj.cols(); ++q) {
        const CvResult cv = design.run(Yj.col(q), policy.pen, policy.cv);
        strength = strength.cwiseMax(cv.fit.coefficients.cwiseAbs());
    }
    IndexList support;
    for (Index i = 0; i < p; ++i) {
        if (strength(i) > 0.0) support.push_back(i);
    }
    if (static_cast<Index>(support.size()) > cap) {
        std::stable_sort(support.begin(), support.end(),
                         [&](Index a, Index b) { return strength(a) > strength(b); });
        support.resize(static_cast<std::size_t>(std::max<Index>(cap, 0)));
        std::sort(support.begin(), support.end());
    }
    return support;
}

BlockStats block_stats(const Eigen::Ref<const Matrix>& Xk, const Eigen::Ref<const Matrix>& Yj,
                       const ScreenPolicy& screen)
{
    const Index n = Xk.rows();
    if (Yj.rows() != n) {
        throw DimensionError("block_stats: X_k has " + std::to_string(n) + " rows, Y_j has " +
                             std::to_string(Yj.rows()));
    }
    if (n < 4) throw DimensionError("block_stats needs at least 4 rows");
    const Index p = Xk.cols();
    const Index budget = n - 3;

    BlockStats s;
    QRFactor f;
    const bool wide = p > budget;
    if (wide && screen.mode == ScreenMode::never) {
        throw ConfigError("block with " + std::to_string(p) + " covariates exceeds the n - 3 = " +
                          std::to_string(budget) + " budget and screening is disabled");
    }
    if (!wide && screen.mode != ScreenMode::always) {
        f = thin_qr(Xk);
        s.rank_deficient = f.rank < p;
    } else {
        IndexList support = screen_support(Xk, Yj, screen, std::min(budget, p));
        f = thin_qr(select_columns(Xk, support));
        s.rank_deficient = f.rank < static_cast<Index>(support.size());
        s.screened_support = std::move(support);
    }
    s.effective_p = f.rank;
    if (n - s.effective_p - 1 < 1) throw ConfigError("block leaves no residual degrees of freedom");

    const Projection proj = project(f, Yj);
    s.fit = proj.fitted.squaredNorm();
    s.rss = proj.residual.squaredNorm();
    fill_ratio(s, n);
    return s;
}

BlockGrid all_block_stats(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y, const GroupSpec& g,
                          const ScreenPolicy& screen)
{
    g.check_against(X.cols(), Y.cols());
    if (X.rows() != Y.rows()) throw DimensionError("X and Y have different row counts");
    require_finite(X, "X");
    require_finite(Y, "Y");

    const Index n = X.rows();
    const Index K = g.K();
    const Index J = g.J();
    BlockGrid grid(K, J);

    // One factorization per covariate group serves every unscreened block in its row.
    std::vector<std::optional<QRFactor>> factors(static_cast<std::size_t>(K));
    parallel_for(static_cast<std::size_t>(K), [&](std::size_t k) {
        const ColumnRange cr = g.covariate_range(static_cast<Index>(k));
        if (cr.size <= n - 3 && screen.mode != ScreenMode::always) {
            factors[k] = thin_qr(X.middleCols(cr.start, cr.size));
        }
    });

    parallel_for(static_cast<std::size_t>(K * J), [&](std::size_t cell) {
        const Index k = static_cast<Index>(cell) / J;
        const Index j = static_cast<Index>(cell) % J;
        const ColumnRange cr = g.covariate_range(k);
        const ColumnRange rr = g.response_range(j);
        BlockStats s;
        const auto& fk = factors[static_cast<std::size_t>(k)];
        if (fk) {
            const auto Yj = Y.middleCols(rr.start, rr.size);
            const Projection proj = project(*fk, Yj);
            s.effective_p = fk->rank;
            s.rank_deficient = fk->rank < cr.size;
            s.fit = proj.fitted.squaredNorm();
            s.rss = proj.residual.squaredNorm();
            fill_ratio(s, n);
        } else {
            s = block_stats(X.middleCols(cr.start, cr.size), Y.middleCols(rr.start, rr.size), screen);
        }
        s.k = k;
        s.j = j;
        grid.at(k, j) = std::move(s);
    });
    return grid;
}

double er_bound(std::span<const double> r2bar, double c)
{
    if (!(c > 0.0 && c < 1.0)) throw DomainError("er_bound: c must lie in (0, 1)");
    const double low = 2.0 * c / (c - 1.0);
    std::size_t below = 0;
    std::size_t above = 0;
    for (double v : r2bar) {
        if (v < low) ++below;
        if (v > c) ++above;
    }
    if (above == 0) return inf;
    return static_cast<double>(below) / static_cast<double>(above);
}

IndicatorMatrix select_threshold(const Matrix& r2bar, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    if (r2bar.size() == 0) throw DimensionError("select_threshold: empty grid");

    std::vector<double> sorted(r2bar.data(), r2bar.data() + r2bar.size());
    std::sort(sorted.begin(), sorted.end());

    for (auto it = sorted.begin(); it != sorted.end(); it = std::upper_bound(it, sorted.end(), *it)) {
        const double c = *it;
        if (!(c > 0.0 && c < 1.0)) continue;
        const double low = 2.0 * c / (c - 1.0);
        const auto below = std::lower_bound(sorted.begin(), sorted.end(), low) - sorted.begin();
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), c);
        if (above == 0) continue;
        if (static_cast<double>(below) / static_cast<double>(above) <= alpha) {
            IndicatorMatrix ind = indicator_at(r2bar, c - threshold_backoff);
            ind.alpha = alpha;
            ind.feasible = true;
            return ind;
        }
    }

    IndicatorMatrix ind = indicator_at(r2bar, 1.0);
    ind.delta.setZero();
    ind.active.clear();
    ind.alpha = alpha;
    ind.feasible = false;
    return ind;
}

IndicatorMatrix select_threshold(const BlockGrid& grid, double alpha) { return select_threshold(grid.r2bar(), alpha); }

IndicatorMatrix indicator_from_gamma(const Matrix& r2bar, double gamma)
{
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
    IndicatorMatrix ind = indicator_at(r2bar, 1.0 - gamma);
    ind.gamma_hat = gamma;
    ind.feasible = true;
    ind.alpha = std::numeric_limits<double>::quiet_NaN();
    return ind;
}

Eigen::MatrixXi block_pattern(const Eigen::Ref<const Matrix>& B, const GroupSpec& g)
{
    if (B.rows() != g.P() || B.cols() != g.Q()) throw DimensionError("coefficient matrix does not match groups");
    Eigen::MatrixXi delta = Eigen::MatrixXi::Zero(g.K(), g.J());
    for (Index k = 0; k < g.K(); ++k) {
        const ColumnRange cr = g.covariate_range(k);
        for (Index j = 0; j < g.J(); ++j) {
            const ColumnRange rr = g.response_range(j);
            delta(k, j) = (B.block(cr.start, rr.start, cr.size, rr.size).array() != 0.0).any() ? 1 : 0;
        }
    }
    return delta;
}

IndicatorMatrix indicator_from_pattern(const Eigen::MatrixXi& delta)
{
    IndicatorMatrix ind;
    ind.delta = delta;
    ind.c_hat = std::numeric_limits<double>::quiet_NaN();
    ind.gamma_hat = std::numeric_limits<double>::quiet_NaN();
    ind.alpha = std::numeric_limits<double>::quiet_NaN();
    for (Index k = 0; k < delta.rows(); ++k) {
        for (Index j = 0; j < delta.cols(); ++j) {
            if (delta(k, j) != 0) ind.active.emplace_back(k, j);
        }
    }
    return ind;
}

} // namespace blocksel
