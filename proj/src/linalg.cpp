#include <blocksel/linalg.hpp>
#include <blocksel/errors.hpp>

#include <cmath>
#include <string>

namespace blocksel {

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what)
{
    if (!m.allFinite()) {
        throw NumericError(std::string(what) + " contains NaN or infinite entries");
    }
}

Standardized standardize(const Eigen::Ref<const Matrix>& m)
{
    const Index n = m.rows();
    if (n < 2) {
        throw DimensionError("standardize needs at least 2 rows, got " + std::to_string(n));
    }
    require_finite(m, "standardize input");

    Standardized out;
    out.data.resize(n, m.cols());
    out.centers.resize(m.cols());
    out.scales.resize(m.cols());
    for (Index c = 0; c < m.cols(); ++c) {
        const double mean = m.col(c).mean();
        const double ss = (m.col(c).array() - mean).square().sum();
        if (!std::isfinite(mean) || !std::isfinite(ss)) {
            throw NumericError("standardize: column " + std::to_string(c + 1) + " overflows double precision");
        }
        double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (!(sd > 0.0)) sd = 1.0;
        out.centers(c) = mean;
        out.scales(c) = sd;
        out.data.col(c) = (m.col(c).array() - mean) / sd;
        if (ss == 0.0) out.data.col(c).setZero();
    }
    return out;
}

Matrix apply_standardization(const Eigen::Ref<const Matrix>& m, const Vector& centers, const Vector& scales)
{
    if (m.cols() != centers.size() || m.cols() != scales.size()) {
        throw DimensionError("apply_standardization: column count does not match statistics");
    }
    Matrix out = m;
    for (Index c = 0; c < m.cols(); ++c) {
        out.col(c) = (m.col(c).array() - centers(c)) / scales(c);
    }
    return out;
}

QRFactor thin_qr(const Eigen::Ref<const Matrix>& m, double tol)
{
    if (m.rows() < 1) {
        throw DimensionError("thin_qr needs at least one row");
    }
    QRFactor f;
    f.source_cols = m.cols();
    if (m.cols() == 0) {
        f.q.resize(m.rows(), 0);
        f.r_upper.resize(0, 0);
        return f;
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(m.rows(), m.cols());
    qr.setThreshold(tol);
    qr.compute(m);

    const Index r = qr.maxPivot() > 0.0 ? qr.rank() : 0;
    f.rank = r;
    f.q = qr.householderQ() * Matrix::Identity(m.rows(), r);
    f.r_upper = qr.matrixR().topLeftCorner(r, r).triangularView<Eigen::Upper>();
    f.kept_columns.reserve(static_cast<std::size_t>(r));
    const auto& perm = qr.colsPermutation().indices();
    for (Index i = 0; i < r; ++i) f.kept_columns.push_back(perm(i));
    return f;
}

Projection project(const QRFactor& f, const Eigen::Ref<const Matrix>& y)
{
    if (y.rows() != f.q.rows()) {
        throw DimensionError("project: y has " + std::to_string(y.rows()) + " rows, factor has " +
                             std::to_string(f.q.rows()));
    }
    Projection p;
    if (f.rank == 0) {
        p.fitted = Matrix::Zero(y.rows(), y.cols());
    } else {
        p.fitted = f.q * (f.q.transpose() * y);
    }
    p.residual = y - p.fitted;
    return p;
}

Matrix ols_solve(const QRFactor& f, const Eigen::Ref<const Matrix>& y)
{
    if (y.rows() != f.q.rows()) {
        throw DimensionError("ols_solve: y has " + std::to_string(y.rows()) + " rows, factor has " +
                             std::to_string(f.q.rows()));
    }
    Matrix coef = Matrix::Zero(f.source_cols, y.cols());
    if (f.rank == 0) return coef;
    const Matrix kept = f.r_upper.triangularView<Eigen::Upper>().solve(f.q.transpose() * y);
    for (Index i = 0; i < f.rank; ++i) {
        coef.row(f.kept_columns[static_cast<std::size_t>(i)]) = kept.row(i);
    }
    return coef;
}

Matrix select_columns(const Eigen::Ref<const Matrix>& m, const IndexList& cols)
{
    Matrix out(m.rows(), static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out.col(static_cast<Index>(i)) = m.col(cols[i]);
    }
    return out;
}

} // namespace blocksel
