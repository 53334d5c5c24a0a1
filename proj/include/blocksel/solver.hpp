#pragma once
#include <cstdint>
#include <optional>
#include <vector>

#include <blocksel/linalg.hpp>

namespace blocksel {

/**
 * Penalized least squares on the internal scale
 *
 *     (1/(2n)) ||y - X b||^2 + lambda * (mix * ||b||_1 + (1 - mix)/2 * ||b||^2).
 *
 * An unnormalized objective ||y - X b||^2 + lambda' ||b||_1 corresponds to
 * lambda = lambda' / (2n).
 */
struct PenaltySpec
{
    double lambda = 0.0;
    double mix = 1.0;
    int max_iter = 100000;  ///< coordinate passes (full or active-set)
    double tol = 1e-7;

    void validate() const;
};

struct LassoFit
{
    Vector coefficients;
    IndexList support;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

/// Quadratic form of a least-squares problem: gram = X'X/n, xty = X'y/n, yty = y'y/n.
struct GramProblem
{
    Matrix gram;
    Vector xty;
    double yty = 0.0;
    Index n = 0;
};

GramProblem make_gram_problem(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y);

/// Cyclic coordinate descent on a precomputed Gram problem.
LassoFit lasso_gram(const GramProblem& prob, const PenaltySpec& pen, const Vector* warm = nullptr);

/// Coordinate descent from `warm` (or zero). Inputs must be finite.
LassoFit lasso_cd(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, const PenaltySpec& pen,
                  const std::optional<Vector>& warm = std::nullopt);

/// Objective value of b on the internal scale.
double penalized_objective(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                           const Eigen::Ref<const Vector>& b, const PenaltySpec& pen);

/// Largest KKT violation of b, measured on the gradient x_i'(y - Xb)/n.
double kkt_violation(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                     const Eigen::Ref<const Vector>& b, const PenaltySpec& pen);

/// max_i |x_i'y|/n, divided by mix so that the head of the path is the null model.
double lambda_max(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, double mix = 1.0);

/// Geometric grid from lambda_max down to lambda_max * ratio, strictly decreasing.
std::vector<double> lambda_path(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                int n_lambdas, double ratio, double mix = 1.0);
std::vector<double> geometric_grid(double lmax, int n_lambdas, double ratio);

/// 1e-3 when n > p, otherwise 1e-2.
double default_path_ratio(Index n, Index p);

/// lambda = m3 * sqrt(n log P) on the unnormalized scale, returned on the internal scale.
double theory_lambda(double m3, Index n, Index P);

enum class CvRule
{
    min_error,
    one_standard_error,
};

struct CvOptions
{
    int folds = 5;
    int n_lambdas = 100;
    double ratio = 0.0;  ///< 0 selects default_path_ratio
    CvRule rule = CvRule::min_error;
    std::uint64_t seed = 0;
};

struct CvResult
{
    double best_lambda = 0.0;
    Index best_index = 0;
    std::vector<double> lambdas;
    std::vector<double> cv_mean;
    std::vector<double> cv_se;
    LassoFit fit;
};

/// fold[i] in [0, folds) for each of n rows; a seeded shuffle dealt round-robin.
std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed);

/**
 * Precomputed cross-validation design for a fixed X: fold assignment plus the
 * per-fold training Gram matrices, shared by every response column fitted on X.
 */
class CvDesign
{
public:
    CvDesign(const Eigen::Ref<const Matrix>& X, int folds, std::uint64_t seed);

    CvResult run(const Eigen::Ref<const Vector>& y, const PenaltySpec& pen, const CvOptions& opts) const;

    /// Fit on all rows along a path down to lambdas[upto] with warm starts.
    LassoFit fit_full(const Eigen::Ref<const Vector>& y, const PenaltySpec& pen, const std::vector<double>& lambdas,
                      std::size_t upto) const;

    Index rows() const { return X_.rows(); }
    Index cols() const { return X_.cols(); }

private:
    Matrix X_;
    Matrix full_gram_;
    int folds_;
    std::vector<int> fold_of_;
    std::vector<IndexList> test_rows_;
    std::vector<Matrix> fold_gram_;
};

CvResult cv_lasso(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, const PenaltySpec& pen,
                  const CvOptions& opts);

enum class LambdaMode
{
    fixed,
    cv,
    theory,
};

struct LambdaSelection
{
    LambdaMode mode = LambdaMode::cv;
    double lambda = 0.0;  ///< used by fixed
    double m3 = 1.0;      ///< used by theory
    CvOptions cv;
};

struct MultiResponseFit
{
    Matrix coefficients;
    std::vector<double> lambdas;
    std::vector<bool> converged;
};

/**
 * Independent penalized fit for every response column q, restricted to the
 * covariate columns in column_masks[q]. Entries outside a mask are exactly
 * zero; an empty mask gives a zero column. An empty `column_masks` vector
 * means every column is allowed for every response.
 */
MultiResponseFit multi_response_lasso(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y,
                                      const PenaltySpec& pen, const std::vector<IndexList>& column_masks,
                                      const LambdaSelection& selection);

} // namespace blocksel
