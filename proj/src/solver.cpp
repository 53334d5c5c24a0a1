#include <blocksel/solver.hpp>
#include <blocksel/errors.hpp>
#include <blocksel/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>

namespace blocksel {

namespace {

// Smallest mix used when scaling the head of a path; pure ridge has no null-model lambda.
constexpr double min_path_mix = 1e-3;

// Inner coordinate passes before trying the direct active-set solve.
constexpr int polish_after_passes = 3;

double gram_kkt(const Vector& grad, const Vector& b, double l1, double l2)
{
    double worst = 0.0;
    for (Index i = 0; i < b.size(); ++i) {
        double v;
        if (b(i) != 0.0) {
            const double s = b(i) > 0.0 ? 1.0 : -1.0;
            v = std::abs(grad(i) - l1 * s - l2 * b(i));
        } else {
            v = std::max(0.0, std::abs(grad(i)) - l1);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

// Once the active set is roughly stable, solve its stationarity system directly.
// When a coefficient would change sign, step to the first zero crossing (the
// objective decreases along that segment), drop it and solve again. The
// caller's coordinate sweep still decides convergence.
void polish_active_set(const Matrix& G, const Vector& c, double l1, double l2, IndexList active, Vector& b,
                       Vector& grad)
{
    while (!active.empty()) {
        const auto m = static_cast<Index>(active.size());
        Matrix Gaa(m, m);
        Vector rhs(m);
        Vector cur(m);
        double diag_max = 0.0;
        for (Index r = 0; r < m; ++r) {
            const Index i = active[static_cast<std::size_t>(r)];
            for (Index s = 0; s < m; ++s) Gaa(r, s) = G(i, active[static_cast<std::size_t>(s)]);
            Gaa(r, r) += l2;
            diag_max = std::max(diag_max, Gaa(r, r));
            cur(r) = b(i);
            rhs(r) = c(i) - l1 * (b(i) > 0.0 ? 1.0 : -1.0);
        }
        const Eigen::LLT<Matrix> llt(Gaa);
        if (llt.info() != Eigen::Success) return;
        const auto L = llt.matrixLLT().diagonal();
        if (L.minCoeff() * L.minCoeff() < 1e-10 * diag_max) return;
        const Vector sol = llt.solve(rhs);
        if (!sol.allFinite()) return;

        double t = 1.0;
        Index hit = -1;
        for (Index r = 0; r < m; ++r) {
            if (sol(r) * cur(r) <= 0.0) {
                const double tr = cur(r) / (cur(r) - sol(r));
                if (tr < t) {
                    t = tr;
                    hit = r;
                }
            }
        }
        for (Index r = 0; r < m; ++r) {
            const Index i = active[static_cast<std::size_t>(r)];
            const double next = r == hit ? 0.0 : cur(r) + t * (sol(r) - cur(r));
            const double delta = next - b(i);
            if (delta != 0.0) {
                b(i) = next;
                grad.noalias() -= delta * G.col(i);
            }
        }
        if (hit < 0) return;
        active.erase(active.begin() + hit);
    }
}

LassoFit solve_cd(const Matrix& G, const Vector& c, double yty, const PenaltySpec& pen, const Vector* warm)
{
    const Index p = G.rows();
    const double l1 = pen.lambda * pen.mix;
    const double l2 = pen.lambda * (1.0 - pen.mix);

    Vector b = warm ? *warm : Vector::Zero(p);
    if (b.size() != p) throw DimensionError("warm start has the wrong length");
    Vector grad = c - G * b;

    auto update = [&](Index i) {
        const double gii = G(i, i);
        const double denom = gii + l2;
        const double old = b(i);
        const double next = denom > 0.0 ? soft_threshold(grad(i) + gii * old, l1) / denom : 0.0;
        const double delta = next - old;
        if (delta != 0.0) {
            b(i) = next;
            grad.noalias() -= delta * G.col(i);
        }
        return std::abs(delta);
    };

    LassoFit fit;
    IndexList active;
    while (fit.iterations < pen.max_iter) {
        double max_delta = 0.0;
        for (Index i = 0; i < p; ++i) max_delta = std::max(max_delta, update(i));
        ++fit.iterations;
        if (max_delta < pen.tol && gram_kkt(grad, b, l1, l2) <= pen.tol) {
            fit.converged = true;
            break;
        }

        active.clear();
        for (Index i = 0; i < p; ++i) {
            if (b(i) != 0.0) active.push_back(i);
        }
        for (int pass = 1; fit.iterations < pen.max_iter; ++pass) {
            double inner = 0.0;
            for (Index i : active) inner = std::max(inner, update(i));
            ++fit.iterations;
            if (inner < pen.tol) break;
            if (pass == polish_after_passes) polish_active_set(G, c, l1, l2, active, b, grad);
        }
    }

    for (Index i = 0; i < p; ++i) {
        if (b(i) != 0.0) fit.support.push_back(i);
    }
    // b'Gb = b'(c - grad)
    fit.objective = 0.5 * (yty - c.dot(b) - grad.dot(b)) +
                    pen.lambda * (pen.mix * b.lpNorm<1>() + 0.5 * (1.0 - pen.mix) * b.squaredNorm());
    fit.coefficients = std::move(b);
    return fit;
}

void check_xy(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y)
{
    if (X.rows() != y.size()) {
        throw DimensionError("X has " + std::to_string(X.rows()) + " rows but y has " + std::to_string(y.size()));
    }
    if (X.rows() < 1) throw DimensionError("empty design");
}

} // namespace

void PenaltySpec::validate() const
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be finite and >= 0");
    if (!(mix >= 0.0 && mix <= 1.0)) throw DomainError("mix must lie in [0, 1]");
    if (!(tol > 0.0)) throw DomainError("tol must be > 0");
    if (max_iter < 1) throw DomainError("max_iter must be >= 1");
}

GramProblem make_gram_problem(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y)
{
    check_xy(X, y);
    const double n = static_cast<double>(X.rows());
    GramProblem prob;
    prob.n = X.rows();
    prob.gram = Matrix(X.cols(), X.cols());
    prob.gram.setZero();
    prob.gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), 1.0 / n);
    prob.gram.triangularView<Eigen::StrictlyUpper>() = prob.gram.transpose();
    prob.xty = X.transpose() * y / n;
    prob.yty = y.squaredNorm() / n;
    return prob;
}

LassoFit lasso_gram(const GramProblem& prob, const PenaltySpec& pen, const Vector* warm)
{
    pen.validate();
    return solve_cd(prob.gram, prob.xty, prob.yty, pen, warm);
}

LassoFit lasso_cd(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, const PenaltySpec& pen,
                  const std::optional<Vector>& warm)
{
    check_xy(X, y);
    require_finite(X, "lasso design");
    require_finite(y, "lasso response");
    if (warm) require_finite(*warm, "lasso warm start");
    const GramProblem prob = make_gram_problem(X, y);
    return lasso_gram(prob, pen, warm ? &*warm : nullptr);
}

double penalized_objective(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                           const Eigen::Ref<const Vector>& b, const PenaltySpec& pen)
{
    check_xy(X, y);
    const double n = static_cast<double>(X.rows());
    const double loss = (y - X * b).squaredNorm() / (2.0 * n);
    return loss + pen.lambda * (pen.mix * b.lpNorm<1>() + 0.5 * (1.0 - pen.mix) * b.squaredNorm());
}

double kkt_violation(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                     const Eigen::Ref<const Vector>& b, const PenaltySpec& pen)
{
    check_xy(X, y);
    const Vector grad = X.transpose() * (y - X * b) / static_cast<double>(X.rows());
    return gram_kkt(grad, b, pen.lambda * pen.mix, pen.lambda * (1.0 - pen.mix));
}

double lambda_max(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, double mix)
{
    check_xy(X, y);
    if (X.cols() == 0) return 0.0;
    const double head = (X.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
    return head / std::max(mix, min_path_mix);
}

std::vector<double> geometric_grid(double lmax, int n_lambdas, double ratio)
{
    if (n_lambdas < 2) throw DomainError("a lambda path needs at least 2 values");
    if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("path ratio must lie in (0, 1)");
    std::vector<double> grid(static_cast<std::size_t>(n_lambdas));
    const double step = std::log(ratio) / static_cast<double>(n_lambdas - 1);
    for (int i = 0; i < n_lambdas; ++i) grid[static_cast<std::size_t>(i)] = lmax * std::exp(step * i);
    grid.front() = lmax;
    grid.back() = lmax * ratio;
    return grid;
}

std::vector<double> lambda_path(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                int n_lambdas, double ratio, double mix)
{
    return geometric_grid(lambda_max(X, y, mix), n_lambdas, ratio);
}

double default_path_ratio(Index n, Index p) { return n > p ? 1e-3 : 1e-2; }

double theory_lambda(double m3, Index n, Index P)
{
    if (!(m3 > 0.0)) throw DomainError("m3 must be > 0");
    const double nn = static_cast<double>(n);
    const double logp = std::log(static_cast<double>(std::max<Index>(P, 2)));
    return m3 * std::sqrt(nn * logp) / (2.0 * nn);
}

std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed)
{
    if (folds < 2 || folds > n) {
        throw DomainError("folds must lie in [2, rows]; got " + std::to_string(folds) + " for " + std::to_string(n) +
                          " rows");
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        fold[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    }
    return fold;
}

CvDesign::CvDesign(const Eigen::Ref<const Matrix>& X, int folds, std::uint64_t seed)
    : X_(X), folds_(folds), fold_of_(fold_assignment(X.rows(), folds, seed))
{
    const Index p = X_.cols();
    Matrix xtx = Matrix::Zero(p, p);
    xtx.selfadjointView<Eigen::Lower>().rankUpdate(X_.transpose());
    xtx.triangularView<Eigen::StrictlyUpper>() = xtx.transpose();
    full_gram_ = xtx / static_cast<double>(X_.rows());

    test_rows_.assign(static_cast<std::size_t>(folds), {});
    for (Index i = 0; i < X_.rows(); ++i) test_rows_[static_cast<std::size_t>(fold_of_[static_cast<std::size_t>(i)])].push_back(i);

    fold_gram_.reserve(static_cast<std::size_t>(folds));
    for (const auto& rows : test_rows_) {
        Matrix xt(static_cast<Index>(rows.size()), p);
        for (std::size_t r = 0; r < rows.size(); ++r) xt.row(static_cast<Index>(r)) = X_.row(rows[r]);
        const double n_train = static_cast<double>(X_.rows() - static_cast<Index>(rows.size()));
        Matrix g = xtx;
        g.noalias() -= xt.transpose() * xt;
        fold_gram_.push_back(g / n_train);
    }
}

LassoFit CvDesign::fit_full(const Eigen::Ref<const Vector>& y, const PenaltySpec& pen,
                            const std::vector<double>& lambdas, std::size_t upto) const
{
    const double n = static_cast<double>(X_.rows());
    const Vector xty = X_.transpose() * y / n;
    const double yty = y.squaredNorm() / n;
    LassoFit fit;
    fit.coefficients = Vector::Zero(X_.cols());
    for (std::size_t l = 0; l <= upto && l < lambdas.size(); ++l) {
        PenaltySpec step = pen;
        step.lambda = lambdas[l];
        fit = solve_cd(full_gram_, xty, yty, step, &fit.coefficients);
    }
    return fit;
}

CvResult CvDesign::run(const Eigen::Ref<const Vector>& y, const PenaltySpec& pen, const CvOptions& opts) const
{
    pen.validate();
    if (y.size() != X_.rows()) throw DimensionError("cv: response length does not match design rows");
    if (opts.folds != folds_) throw DomainError("cv: fold count differs from the prepared design");

    const Index n = X_.rows();
    const Index p = X_.cols();
    CvResult res;

    const Vector xty_raw = X_.transpose() * y;
    const double head = p > 0 ? xty_raw.cwiseAbs().maxCoeff() / static_cast<double>(n) : 0.0;
    const double lmax = head / std::max(pen.mix, min_path_mix);
    if (!(lmax > 0.0)) {
        res.lambdas = {0.0};
        res.cv_mean = {y.squaredNorm() / static_cast<double>(n)};
        res.cv_se = {0.0};
        res.fit.coefficients = Vector::Zero(p);
        res.fit.objective = 0.5 * y.squaredNorm() / static_cast<double>(n);
        res.fit.converged = true;
        return res;
    }
    const double ratio = opts.ratio > 0.0 ? opts.ratio : default_path_ratio(n, p);
    res.lambdas = geometric_grid(lmax, opts.n_lambdas, ratio);
    const std::size_t L = res.lambdas.size();

    std::vector<std::vector<double>> fold_mse(static_cast<std::size_t>(folds_), std::vector<double>(L, 0.0));
    for (int f = 0; f < folds_; ++f) {
        const auto& rows = test_rows_[static_cast<std::size_t>(f)];
        const Index n_test = static_cast<Index>(rows.size());
        const double n_train = static_cast<double>(n - n_test);

        Matrix xt(n_test, p);
        Vector yt(n_test);
        for (Index r = 0; r < n_test; ++r) {
            xt.row(r) = X_.row(rows[static_cast<std::size_t>(r)]);
            yt(r) = y(rows[static_cast<std::size_t>(r)]);
        }
        const Vector xty = (xty_raw - xt.transpose() * yt) / n_train;
        const double yty = (y.squaredNorm() - yt.squaredNorm()) / n_train;

        Vector b = Vector::Zero(p);
        Vector pred(n_test);
        for (std::size_t l = 0; l < L; ++l) {
            PenaltySpec step = pen;
            step.lambda = res.lambdas[l];
            LassoFit fit = solve_cd(fold_gram_[static_cast<std::size_t>(f)], xty, yty, step, &b);
            b = std::move(fit.coefficients);
            pred.setZero();
            for (Index a : fit.support) pred.noalias() += b(a) * xt.col(a);
            fold_mse[static_cast<std::size_t>(f)][l] = (yt - pred).squaredNorm() / static_cast<double>(n_test);
        }
    }

    res.cv_mean.assign(L, 0.0);
    res.cv_se.assign(L, 0.0);
    const double k = static_cast<double>(folds_);
    for (std::size_t l = 0; l < L; ++l) {
        double mean = 0.0;
        for (int f = 0; f < folds_; ++f) mean += fold_mse[static_cast<std::size_t>(f)][l];
        mean /= k;
        double var = 0.0;
        for (int f = 0; f < folds_; ++f) {
            const double d = fold_mse[static_cast<std::size_t>(f)][l] - mean;
            var += d * d;
        }
        var /= (k - 1.0);
        res.cv_mean[l] = mean;
        res.cv_se[l] = std::sqrt(var / k);
    }

    std::size_t best = 0;
    for (std::size_t l = 1; l < L; ++l) {
        if (res.cv_mean[l] < res.cv_mean[best]) best = l;
    }
    if (opts.rule == CvRule::one_standard_error) {
        const double bound = res.cv_mean[best] + res.cv_se[best];
        for (std::size_t l = 0; l <= best; ++l) {
            if (res.cv_mean[l] <= bound) {
                best = l;
                break;
            }
        }
    }
    res.best_index = static_cast<Index>(best);
    res.best_lambda = res.lambdas[best];
    res.fit = fit_full(y, pen, res.lambdas, best);
    return res;
}

CvResult cv_lasso(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, const PenaltySpec& pen,
                  const CvOptions& opts)
{
    check_xy(X, y);
    require_finite(X, "cv design");
    require_finite(y, "cv response");
    const CvDesign design(X, opts.folds, opts.seed);
    return design.run(y, pen, opts);
}

MultiResponseFit multi_response_lasso(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y,
                                      const PenaltySpec& pen, const std::vector<IndexList>& column_masks,
                                      const LambdaSelection& selection)
{
    pen.validate();
    if (X.rows() != Y.rows()) {
        throw DimensionError("X has " + std::to_string(X.rows()) + " rows but Y has " + std::to_string(Y.rows()));
    }
    require_finite(X, "design");
    require_finite(Y, "responses");
    const Index P = X.cols();
    const Index Q = Y.cols();
    const Index n = X.rows();

    std::vector<IndexList> masks;
    if (column_masks.empty()) {
        IndexList all(static_cast<std::size_t>(P));
        std::iota(all.begin(), all.end(), Index{0});
        masks.assign(static_cast<std::size_t>(Q), all);
    } else {
        if (static_cast<Index>(column_masks.size()) != Q) {
            throw DimensionError("need one column mask per response column");
        }
        masks = column_masks;
        for (auto& m : masks) {
            std::sort(m.begin(), m.end());
            m.erase(std::unique(m.begin(), m.end()), m.end());
            if (!m.empty() && (m.front() < 0 || m.back() >= P)) {
                throw DimensionError("column mask index outside [0, P)");
            }
        }
    }

    // Columns sharing a mask share one prepared design.
    std::map<IndexList, std::size_t> mask_id;
    std::vector<const IndexList*> unique_masks;
    std::vector<std::size_t> column_mask(static_cast<std::size_t>(Q));
    for (Index q = 0; q < Q; ++q) {
        const auto& m = masks[static_cast<std::size_t>(q)];
        auto [it, inserted] = mask_id.emplace(m, unique_masks.size());
        if (inserted) unique_masks.push_back(&it->first);
        column_mask[static_cast<std::size_t>(q)] = it->second;
    }

    struct Prepared
    {
        Matrix Xm;
        std::unique_ptr<CvDesign> design;
        Matrix gram;
    };
    std::vector<Prepared> prepared(unique_masks.size());
    parallel_for(unique_masks.size(), [&](std::size_t u) {
        const IndexList& m = *unique_masks[u];
        if (m.empty()) return;
        Prepared& prep = prepared[u];
        prep.Xm = select_columns(X, m);
        if (selection.mode == LambdaMode::cv) {
            prep.design = std::make_unique<CvDesign>(prep.Xm, selection.cv.folds, selection.cv.seed);
        } else {
            prep.gram = prep.Xm.transpose() * prep.Xm / static_cast<double>(n);
        }
    });

    double fixed_lambda = selection.lambda;
    if (selection.mode == LambdaMode::theory) fixed_lambda = theory_lambda(selection.m3, n, P);
    if (selection.mode != LambdaMode::cv && !(fixed_lambda >= 0.0)) throw DomainError("lambda must be >= 0");

    MultiResponseFit out;
    out.coefficients = Matrix::Zero(P, Q);
    out.lambdas.assign(static_cast<std::size_t>(Q), 0.0);
    std::vector<char> converged(static_cast<std::size_t>(Q), 1);

    parallel_for(static_cast<std::size_t>(Q), [&](std::size_t q) {
        const std::size_t u = column_mask[q];
        const IndexList& m = *unique_masks[u];
        if (m.empty()) {
            if (selection.mode != LambdaMode::cv) out.lambdas[q] = fixed_lambda;
            return;
        }
        const Prepared& prep = prepared[u];
        const auto y = Y.col(static_cast<Index>(q));
        LassoFit fit;
        if (selection.mode == LambdaMode::cv) {
            CvResult cv = prep.design->run(y, pen, selection.cv);
            out.lambdas[q] = cv.best_lambda;
            fit = std::move(cv.fit);
        } else {
            PenaltySpec step = pen;
            step.lambda = fixed_lambda;
            const Vector xty = prep.Xm.transpose() * y / static_cast<double>(n);
            fit = solve_cd(prep.gram, xty, y.squaredNorm() / static_cast<double>(n), step, nullptr);
            out.lambdas[q] = fixed_lambda;
        }
        converged[q] = fit.converged ? 1 : 0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            out.coefficients(m[i], static_cast<Index>(q)) = fit.coefficients(static_cast<Index>(i));
        }
    });
    out.converged.assign(converged.begin(), converged.end());
    return out;
}

} // namespace blocksel
