#pragma once
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <blocksel/groups.hpp>
#include <blocksel/linalg.hpp>
#include <blocksel/solver.hpp>

namespace blocksel {

enum class ScreenMode
{
    automatic,  ///< screen only when p_k > n - 3
    always,
    never,      ///< p_k > n - 3 is then a configuration error
};

/// How the lasso support of a wide block is chosen.
struct ScreenPolicy
{
    ScreenMode mode = ScreenMode::automatic;
    CvOptions cv{5, 100, 0.0, CvRule::one_standard_error, 0};
    PenaltySpec pen{};
};

/**
 * Projection statistics of one block (k, j).
 *
 * l = [rss / (n - p - 1)] / [fit / max(p - 1, 1)] with p = effective_p, and
 * r2bar = 1 - l. A block with no fitted energy reports l = +inf, r2bar = -inf.
 */
struct BlockStats
{
    Index k = 0;
    Index j = 0;
    Index effective_p = 0;
    double rss = 0.0;
    double fit = 0.0;
    double l = 0.0;
    double r2bar = 0.0;
    std::optional<IndexList> screened_support;  ///< column indices within X_k
    bool rank_deficient = false;
};

/// K x J grid of block statistics, row-major in k.
class BlockGrid
{
public:
    BlockGrid() = default;
    BlockGrid(Index K, Index J) : K_(K), J_(J), cells_(static_cast<std::size_t>(K * J)) {}

    Index K() const { return K_; }
    Index J() const { return J_; }
    BlockStats& at(Index k, Index j) { return cells_.at(static_cast<std::size_t>(k * J_ + j)); }
    const BlockStats& at(Index k, Index j) const { return cells_.at(static_cast<std::size_t>(k * J_ + j)); }
    const std::vector<BlockStats>& cells() const { return cells_; }

    Matrix r2bar() const;

private:
    Index K_ = 0;
    Index J_ = 0;
    std::vector<BlockStats> cells_;
};

/// Lasso screening of a wide block: per-column supports, union, capped at `cap` columns.
IndexList screen_support(const Eigen::Ref<const Matrix>& Xk, const Eigen::Ref<const Matrix>& Yj,
                         const ScreenPolicy& policy, Index cap);

BlockStats block_stats(const Eigen::Ref<const Matrix>& Xk, const Eigen::Ref<const Matrix>& Yj,
                       const ScreenPolicy& screen = {});

/// One BlockStats per (k, j); blocks are evaluated in parallel.
BlockGrid all_block_stats(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y, const GroupSpec& g,
                          const ScreenPolicy& screen = {});

/**
 * Upper bound on the selection error rate at threshold c in (0, 1):
 * |{r2bar < 2c/(c-1)}| / |{r2bar > c}|, +inf when nothing exceeds c.
 */
double er_bound(std::span<const double> r2bar, double c);

struct IndicatorMatrix
{
    Eigen::MatrixXi delta;  ///< K x J, entries 0/1
    double c_hat = 1.0;
    double gamma_hat = 0.0;
    double alpha = 0.0;
    bool feasible = false;  ///< false when no threshold met the error-rate bound
    std::vector<std::pair<Index, Index>> active;

    Index selected() const { return static_cast<Index>(active.size()); }
};

/// Amount subtracted from the first feasible grid value so its own block is kept.
inline constexpr double threshold_backoff = 1e-12;
inline constexpr double default_alpha = 0.05;

/**
 * Scans the ascending r2bar values lying in (0, 1) and returns the first
 * threshold whose error-rate bound is <= alpha. Blocks with r2bar above the
 * chosen threshold form the active set; none qualifying yields an empty set
 * with c_hat = 1.
 */
IndicatorMatrix select_threshold(const Matrix& r2bar, double alpha = default_alpha);
IndicatorMatrix select_threshold(const BlockGrid& grid, double alpha = default_alpha);

/// delta = [r2bar > 1 - gamma].
IndicatorMatrix indicator_from_gamma(const Matrix& r2bar, double gamma);

/// Delta_kj = 1 iff block (k, j) of B holds a nonzero entry.
Eigen::MatrixXi block_pattern(const Eigen::Ref<const Matrix>& B, const GroupSpec& g);

/// Wraps a 0/1 pattern as an IndicatorMatrix (no threshold attached).
IndicatorMatrix indicator_from_pattern(const Eigen::MatrixXi& delta);

} // namespace blocksel
