#include <blocksel/groups.hpp>
#include <blocksel/errors.hpp>

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace blocksel {

namespace {

std::vector<Index> starts_of(const std::vector<Index>& sizes)
{
    std::vector<Index> starts(sizes.size());
    Index acc = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        starts[i] = acc;
        acc += sizes[i];
    }
    return starts;
}

void validate_sizes(const std::vector<Index>& sizes, const char* kind)
{
    if (sizes.empty()) {
        throw ConfigError(std::string(kind) + " groups: at least one group is required");
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 1) {
            throw ConfigError(std::string(kind) + " group " + std::to_string(i + 1) + " has size " +
                              std::to_string(sizes[i]) + "; sizes must be >= 1");
        }
    }
}

Index group_of(const std::vector<Index>& starts, Index total, Index col)
{
    if (col < 0 || col >= total) throw DimensionError("column index out of range");
    const auto it = std::upper_bound(starts.begin(), starts.end(), col);
    return static_cast<Index>(it - starts.begin()) - 1;
}

std::string mismatch_message(const char* kind, const std::vector<Index>& sizes, Index actual)
{
    Index acc = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        acc += sizes[i];
        if (acc > actual) {
            return std::string(kind) + " group " + std::to_string(i + 1) + " (columns " +
                   std::to_string(acc - sizes[i] + 1) + "-" + std::to_string(acc) +
                   ") exceeds the " + std::to_string(actual) + " available columns";
        }
    }
    return std::string(kind) + " groups cover " + std::to_string(acc) + " columns but the data has " +
           std::to_string(actual) + "; group " + std::to_string(sizes.size()) + " ends early";
}

} // namespace

GroupSpec::GroupSpec(std::vector<Index> covariate_sizes, std::vector<Index> response_sizes)
    : covariate_sizes_(std::move(covariate_sizes)), response_sizes_(std::move(response_sizes))
{
    validate_sizes(covariate_sizes_, "covariate");
    validate_sizes(response_sizes_, "response");
    covariate_starts_ = starts_of(covariate_sizes_);
    response_starts_ = starts_of(response_sizes_);
    P_ = std::accumulate(covariate_sizes_.begin(), covariate_sizes_.end(), Index{0});
    Q_ = std::accumulate(response_sizes_.begin(), response_sizes_.end(), Index{0});
}

GroupSpec GroupSpec::uniform(Index P, Index Q, Index covariate_size, Index response_size)
{
    if (covariate_size < 1 || response_size < 1 || P % covariate_size != 0 || Q % response_size != 0) {
        throw ConfigError("uniform groups: sizes must be positive and divide P and Q");
    }
    return GroupSpec(std::vector<Index>(static_cast<std::size_t>(P / covariate_size), covariate_size),
                     std::vector<Index>(static_cast<std::size_t>(Q / response_size), response_size));
}

ColumnRange GroupSpec::covariate_range(Index k) const
{
    const auto i = static_cast<std::size_t>(k);
    return {covariate_starts_.at(i), covariate_sizes_.at(i)};
}

ColumnRange GroupSpec::response_range(Index j) const
{
    const auto i = static_cast<std::size_t>(j);
    return {response_starts_.at(i), response_sizes_.at(i)};
}

Index GroupSpec::covariate_group_of(Index col) const { return group_of(covariate_starts_, P_, col); }
Index GroupSpec::response_group_of(Index col) const { return group_of(response_starts_, Q_, col); }

void GroupSpec::check_against(Index x_cols, Index y_cols) const
{
    if (P_ != x_cols) throw DimensionError(mismatch_message("covariate", covariate_sizes_, x_cols));
    if (Q_ != y_cols) throw DimensionError(mismatch_message("response", response_sizes_, y_cols));
}

GroupSpec group_spec_from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("group spec: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("covariate_sizes") || !j.contains("response_sizes")) {
        throw ConfigError("group spec must be an object with covariate_sizes and response_sizes");
    }
    try {
        return GroupSpec(j.at("covariate_sizes").get<std::vector<Index>>(),
                         j.at("response_sizes").get<std::vector<Index>>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("group spec: ") + e.what());
    }
}

std::string group_spec_to_json(const GroupSpec& g)
{
    nlohmann::json j;
    j["covariate_sizes"] = g.covariate_sizes();
    j["response_sizes"] = g.response_sizes();
    return j.dump();
}

std::vector<Index> parse_sizes(const std::string& text)
{
    std::vector<Index> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse group size '" + item + "'");
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (used != item.size()) throw ConfigError("cannot parse group size '" + item + "'");
        if (v < 1) throw ConfigError("group sizes must be positive, got " + std::to_string(v));
        out.push_back(static_cast<Index>(v));
    }
    if (out.empty()) throw ConfigError("empty group size list");
    return out;
}

} // namespace blocksel
