#pragma once
#include <string>
#include <vector>

#include <blocksel/linalg.hpp>

namespace blocksel {

/// A contiguous column range [start, start + size).
struct ColumnRange
{
    Index start = 0;
    Index size = 0;
};

/**
 * Partition of the P covariate columns into K contiguous groups and the Q
 * response columns into J contiguous groups, in declaration order.
 */
class GroupSpec
{
public:
    GroupSpec() = default;
    GroupSpec(std::vector<Index> covariate_sizes, std::vector<Index> response_sizes);

    /// Equal-size groups; the sizes must divide P and Q.
    static GroupSpec uniform(Index P, Index Q, Index covariate_size, Index response_size);

    const std::vector<Index>& covariate_sizes() const { return covariate_sizes_; }
    const std::vector<Index>& response_sizes() const { return response_sizes_; }

    Index K() const { return static_cast<Index>(covariate_sizes_.size()); }
    Index J() const { return static_cast<Index>(response_sizes_.size()); }
    Index P() const { return P_; }
    Index Q() const { return Q_; }

    ColumnRange covariate_range(Index k) const;
    ColumnRange response_range(Index j) const;

    /// Group index owning covariate column `col` / response column `col`.
    Index covariate_group_of(Index col) const;
    Index response_group_of(Index col) const;

    /// Throws DimensionError naming the first offending group if P/Q disagree with the data.
    void check_against(Index x_cols, Index y_cols) const;

    bool operator==(const GroupSpec&) const = default;

private:
    std::vector<Index> covariate_sizes_;
    std::vector<Index> response_sizes_;
    std::vector<Index> covariate_starts_;
    std::vector<Index> response_starts_;
    Index P_ = 0;
    Index Q_ = 0;
};

/// {"covariate_sizes": [...], "response_sizes": [...]}
GroupSpec group_spec_from_json(const std::string& text);
std::string group_spec_to_json(const GroupSpec& g);

/// "20,20,30" -> {20, 20, 30}; throws ConfigError on malformed input.
std::vector<Index> parse_sizes(const std::string& text);

} // namespace blocksel
