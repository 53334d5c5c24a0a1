#pragma once
#include <vector>
#include <Eigen/Dense>

namespace blocksel {

/// Dense matrices are Eigen column-major doubles throughout the library.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Throws NumericError if any entry is NaN or infinite. `what` names the input.
void require_finite(const Eigen::Ref<const Matrix>& m, const char* what);

struct Standardized
{
    Matrix data;
    Vector centers;
    Vector scales;
};

/**
 * Center every column to mean 0 and scale to sample standard deviation 1
 * (divisor n-1). Constant columns keep scale 1 and become all zero.
 * Requires at least two rows.
 */
Standardized standardize(const Eigen::Ref<const Matrix>& m);

/// Applies previously computed centers/scales, e.g. training statistics to a test set.
Matrix apply_standardization(const Eigen::Ref<const Matrix>& m, const Vector& centers, const Vector& scales);

/**
 * Thin column-pivoted QR. `q` is n x r with orthonormal columns, `r_upper` is
 * r x r upper triangular, and q * r_upper == m(:, kept_columns) with
 * kept_columns listed in pivot order.
 */
struct QRFactor
{
    Matrix q;
    Matrix r_upper;
    Index rank = 0;
    IndexList kept_columns;
    Index source_cols = 0;
};

inline constexpr double default_rank_tol = 1e-10;

/// Columns whose pivot falls below tol * (largest pivot) are dropped.
QRFactor thin_qr(const Eigen::Ref<const Matrix>& m, double tol = default_rank_tol);

struct Projection
{
    Matrix fitted;
    Matrix residual;
};

/// Orthogonal projection of y onto span(q); never forms the n x n projector.
Projection project(const QRFactor& f, const Eigen::Ref<const Matrix>& y);

/// Least-squares coefficients on the kept columns, exact zeros on dropped ones.
Matrix ols_solve(const QRFactor& f, const Eigen::Ref<const Matrix>& y);

/// Columns of m selected by index, in the given order.
Matrix select_columns(const Eigen::Ref<const Matrix>& m, const IndexList& cols);

} // namespace blocksel
