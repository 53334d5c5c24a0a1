#include <blocksel/simbench.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include <blocksel/errors.hpp>
#include <blocksel/parallel.hpp>

namespace blocksel {

namespace {

std::vector<Index> pattern_sizes(Index total)
{
    std::vector<Index> sizes;
    Index used = 0;
    for (std::size_t i = 0; used < total; ++i) {
        const Index want = (i % 2 == 0) ? 20 : 30;
        const Index take = std::min(want, total - used);
        sizes.push_back(take);
        used += take;
    }
    return sizes;
}

std::vector<Index> equal_sizes(Index total, Index size)
{
    std::vector<Index> sizes(static_cast<std::size_t>(total / size), size);
    if (total % size != 0)
        sizes.push_back(total % size);
    return sizes;
}

// First m entries of a uniform random permutation of 0..count-1.
IndexList sample_without_replacement(Index count, Index m, std::mt19937_64& rng)
{
    IndexList idx(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = 0; i < m; ++i) {
        std::uniform_int_distribution<Index> pick(i, count - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(m));
    return idx;
}

} // namespace

GroupSpec SimulationSpec::groups() const
{
    switch (group_setting) {
    case GroupSetting::equal:
        return GroupSpec(equal_sizes(P, group_size), equal_sizes(Q, group_size));
    case GroupSetting::unequal_pattern:
        return GroupSpec(pattern_sizes(P), pattern_sizes(Q));
    case GroupSetting::explicit_sizes:
        break;
    }
    GroupSpec g(covariate_sizes, response_sizes);
    if (g.P() != P || g.Q() != Q)
        throw ConfigError("explicit group sizes sum to " + std::to_string(g.P()) + " x " + std::to_string(g.Q()) +
                          ", expected " + std::to_string(P) + " x " + std::to_string(Q));
    return g;
}

void SimulationSpec::validate() const
{
    if (n < 4)
        throw ConfigError("simulation n must be at least 4");
    if (P < 1 || Q < 1)
        throw ConfigError("simulation P and Q must be positive");
    if (n_test < 1)
        throw ConfigError("simulation n_test must be positive");
    if (group_setting == GroupSetting::equal && group_size < 1)
        throw ConfigError("group_size must be positive");
    if (!(sparsity >= 0.0 && sparsity < 100.0))
        throw ConfigError("sparsity must lie in [0, 100)");
    if (!(coef_low > 0.0 && coef_high >= coef_low))
        throw ConfigError("coefficient range must satisfy 0 < coef_low <= coef_high");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
        throw ConfigError("noise_sd must be finite and non-negative");
    if (!(std::abs(correlation) < 1.0))
        throw ConfigError("correlation must lie in (-1, 1)");
    const GroupSpec g = groups();
    const auto too_many = [&](Index kj) {
        if (kj < 1 || kj > g.K())
            throw ConfigError("K_j = " + std::to_string(kj) + " is outside [1, K] with K = " + std::to_string(g.K()));
    };
    if (kj_law == KjLaw::fixed) {
        too_many(kj_fixed);
    } else {
        if (kj_choices.empty())
            throw ConfigError("kj_choices must not be empty");
        for (Index kj : kj_choices)
            too_many(kj);
    }
}

SimulationSpec simulation_spec_from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("simulation spec: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("simulation spec must be a JSON object");

    SimulationSpec s;
    try {
        s.n = j.value("n", s.n);
        s.P = j.value("P", s.P);
        s.Q = j.value("Q", s.Q);
        const std::string setting = j.value("group_setting", std::string("equal"));
        if (setting == "equal") {
            s.group_setting = GroupSetting::equal;
        } else if (setting == "unequal" || setting == "unequal_pattern") {
            s.group_setting = GroupSetting::unequal_pattern;
        } else if (setting == "explicit") {
            s.group_setting = GroupSetting::explicit_sizes;
            s.covariate_sizes = j.at("covariate_sizes").get<std::vector<Index>>();
            s.response_sizes = j.at("response_sizes").get<std::vector<Index>>();
        } else {
            throw ConfigError("unknown group_setting '" + setting + "'");
        }
        s.group_size = j.value("group_size", s.group_size);
        if (j.contains("kj_fixed")) {
            s.kj_law = KjLaw::fixed;
            s.kj_fixed = j.at("kj_fixed").get<Index>();
        }
        if (j.contains("kj_choices")) {
            if (j.contains("kj_fixed"))
                throw ConfigError("give either kj_fixed or kj_choices, not both");
            s.kj_law = KjLaw::random;
            s.kj_choices = j.at("kj_choices").get<std::vector<Index>>();
        }
        s.sparsity = j.value("sparsity", s.sparsity);
        s.coef_low = j.value("coef_low", s.coef_low);
        s.coef_high = j.value("coef_high", s.coef_high);
        s.noise_sd = j.value("noise_sd", s.noise_sd);
        s.correlation = j.value("correlation", s.correlation);
        s.n_test = j.value("n_test", s.n_test);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("simulation spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::string simulation_spec_to_json(const SimulationSpec& s)
{
    nlohmann::json j;
    j["n"] = s.n;
    j["P"] = s.P;
    j["Q"] = s.Q;
    switch (s.group_setting) {
    case GroupSetting::equal:
        j["group_setting"] = "equal";
        j["group_size"] = s.group_size;
        break;
    case GroupSetting::unequal_pattern:
        j["group_setting"] = "unequal";
        break;
    case GroupSetting::explicit_sizes:
        j["group_setting"] = "explicit";
        j["covariate_sizes"] = s.covariate_sizes;
        j["response_sizes"] = s.response_sizes;
        break;
    }
    if (s.kj_law == KjLaw::fixed)
        j["kj_fixed"] = s.kj_fixed;
    else
        j["kj_choices"] = s.kj_choices;
    j["sparsity"] = s.sparsity;
    j["coef_low"] = s.coef_low;
    j["coef_high"] = s.coef_high;
    j["noise_sd"] = s.noise_sd;
    j["correlation"] = s.correlation;
    j["n_test"] = s.n_test;
    j["seed"] = s.seed;
    return j.dump(2);
}

Index active_block_nonzeros(Index pk, Index qj, double sparsity)
{
    const auto m = static_cast<Index>(std::llround(static_cast<double>(pk * qj) * (1.0 - sparsity / 100.0)));
    // A chosen block always carries at least one nonzero so the truth pattern matches the draw.
    return std::clamp<Index>(m, 1, pk * qj);
}

SimulatedData generate(const SimulationSpec& spec)
{
    spec.validate();
    const GroupSpec g = spec.groups();
    std::mt19937_64 rng(spec.seed);

    Matrix B = Matrix::Zero(spec.P, spec.Q);
    std::uniform_real_distribution<double> magnitude(spec.coef_low, spec.coef_high);
    std::bernoulli_distribution negative(0.5);
    for (Index j = 0; j < g.J(); ++j) {
        Index kj = spec.kj_fixed;
        if (spec.kj_law == KjLaw::random) {
            std::uniform_int_distribution<std::size_t> pick(0, spec.kj_choices.size() - 1);
            kj = spec.kj_choices[pick(rng)];
        }
        IndexList chosen = sample_without_replacement(g.K(), kj, rng);
        std::sort(chosen.begin(), chosen.end());
        const ColumnRange rr = g.response_range(j);
        for (Index k : chosen) {
            const ColumnRange cr = g.covariate_range(k);
            const Index cells = cr.size * rr.size;
            const IndexList pos = sample_without_replacement(cells, active_block_nonzeros(cr.size, rr.size, spec.sparsity), rng);
            for (Index p : pos) {
                const double v = magnitude(rng);
                B(cr.start + p % cr.size, rr.start + p / cr.size) = negative(rng) ? -v : v;
            }
        }
    }

    const Index rows = spec.n + spec.n_test;
    std::normal_distribution<double> normal(0.0, 1.0);
    const double rho = spec.correlation;
    const double innov = std::sqrt(1.0 - rho * rho);
    Matrix X(rows, spec.P);
    for (Index i = 0; i < rows; ++i) {
        double prev = normal(rng);
        X(i, 0) = prev;
        for (Index a = 1; a < spec.P; ++a) {
            prev = rho * prev + innov * normal(rng);
            X(i, a) = prev;
        }
    }
    Matrix E(rows, spec.Q);
    for (Index i = 0; i < rows; ++i)
        for (Index q = 0; q < spec.Q; ++q)
            E(i, q) = spec.noise_sd * normal(rng);
    const Matrix Y = X * B + E;

    const Standardized xs = standardize(X.topRows(spec.n));
    const Standardized ys = standardize(Y.topRows(spec.n));

    SimulatedData out{.X_train = xs.data,
                      .Y_train = ys.data,
                      .X_test = apply_standardization(X.bottomRows(spec.n_test), xs.centers, xs.scales),
                      .Y_test = apply_standardization(Y.bottomRows(spec.n_test), ys.centers, ys.scales),
                      .standardization = {xs.centers, xs.scales, ys.centers, ys.scales},
                      .truth = {},
                      .groups = g};
    out.truth.delta = block_pattern(B, g);
    for (Index q = 0; q < spec.Q; ++q)
        for (Index a = 0; a < spec.P; ++a)
            if (B(a, q) != 0.0)
                out.truth.nonzero_entries.push_back(a + q * spec.P);
    out.truth.B = std::move(B);
    return out;
}

MetricsReport evaluate(const FitResult& fit, const GroundTruth& truth, const Eigen::Ref<const Matrix>& X_test,
                       const Eigen::Ref<const Matrix>& Y_test, const GroupSpec& g)
{
    const Matrix& Bs = fit.coefficients;
    if (Bs.rows() != truth.B.rows() || Bs.cols() != truth.B.cols())
        throw DimensionError("estimate is " + std::to_string(Bs.rows()) + " x " + std::to_string(Bs.cols()) +
                             " but truth is " + std::to_string(truth.B.rows()) + " x " + std::to_string(truth.B.cols()));
    if (X_test.cols() != Bs.rows() || Y_test.cols() != Bs.cols() || X_test.rows() != Y_test.rows())
        throw DimensionError("test data shape does not match the estimate");

    MetricsReport r;
    r.method = method_name(fit.method);
    r.time_seconds = fit.elapsed_seconds;
    r.test_mse = (Y_test - X_test * Bs).squaredNorm() / static_cast<double>(Y_test.rows() * Y_test.cols());

    const Eigen::MatrixXi est = block_pattern(Bs, g);
    const Index selected = est.sum();
    const Index relevant = truth.delta.sum();
    const Index hits = est.cwiseProduct(truth.delta).sum();
    r.precision = selected == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(selected);
    r.recall = relevant == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(relevant);

    const Matrix Braw = fit.standardization ? unstandardize_coefficients(Bs, *fit.standardization) : Bs;
    const Matrix diff = Braw - truth.B;
    r.l1 = diff.cwiseAbs().sum();
    r.l2 = diff.norm();

    Index nne = 0, false_hits = 0, true_hits = 0;
    for (Index q = 0; q < Bs.cols(); ++q) {
        for (Index a = 0; a < Bs.rows(); ++a) {
            const bool est_nz = Bs(a, q) != 0.0;
            const bool true_nz = truth.B(a, q) != 0.0;
            nne += est_nz;
            false_hits += est_nz && !true_nz;
            true_hits += est_nz && true_nz;
        }
    }
    const auto true_count = static_cast<Index>(truth.nonzero_entries.size());
    r.nne = nne;
    r.pdr = true_count == 0 ? 1.0 : static_cast<double>(true_hits) / static_cast<double>(true_count);
    r.fdr = nne == 0 ? 0.0 : static_cast<double>(false_hits) / static_cast<double>(nne);
    return r;
}

FitResult fit_method(Method method, const SimulatedData& data, std::uint64_t seed, const BenchmarkOptions& opts)
{
    FitResult fit;
    switch (method) {
    case Method::nbslasso: {
        NbsOptions o = opts.nbs;
        o.lambda.cv.seed = seed;
        o.screen.cv.seed = seed;
        fit = nbslasso_fit(data.X_train, data.Y_train, data.groups, o);
        break;
    }
    case Method::lasso:
    case Method::enet: {
        BaselineOptions o = opts.baseline;
        o.lambda.cv.seed = seed;
        fit = baseline_fit(data.X_train, data.Y_train, data.groups, method, o);
        break;
    }
    default:
        throw ConfigError("method '" + method_name(method) + "' is a single-block estimator and cannot be benchmarked");
    }
    fit.standardization = data.standardization;
    return fit;
}

BenchmarkResult run_benchmark(const SimulationSpec& spec, const std::vector<Method>& methods, Index replications,
                              std::uint64_t base_seed, const BenchmarkOptions& opts)
{
    if (replications < 1)
        throw ConfigError("replications must be at least 1");
    if (methods.empty())
        throw ConfigError("at least one method is required");
    spec.validate();

    const auto reps = static_cast<std::size_t>(replications);
    std::vector<std::vector<MetricsReport>> per_rep(reps);
    parallel_for(reps, [&](std::size_t r) {
        const std::uint64_t seed = base_seed + r;
        SimulationSpec local = spec;
        local.seed = seed;
        std::vector<MetricsReport>& out = per_rep[r];
        std::optional<SimulatedData> data;
        std::string gen_error;
        try {
            data = generate(local);
        } catch (const std::exception& e) {
            gen_error = e.what();
        }
        for (Method m : methods) {
            MetricsReport rep;
            try {
                if (!data)
                    throw NumericError("data generation failed: " + gen_error);
                const FitResult fit = fit_method(m, *data, seed, opts);
                rep = evaluate(fit, data->truth, data->X_test, data->Y_test, data->groups);
            } catch (const std::exception& e) {
                rep = MetricsReport{};
                rep.method = method_name(m);
                rep.ok = false;
                rep.error = e.what();
            }
            rep.replication = static_cast<Index>(r);
            rep.seed = seed;
            rep.sparsity = spec.sparsity;
            out.push_back(std::move(rep));
        }
    });

    BenchmarkResult result;
    for (auto& v : per_rep)
        for (auto& rep : v)
            result.reports.push_back(std::move(rep));
    result.aggregate = aggregate_reports(result.reports);
    return result;
}

std::vector<AggregateRow> aggregate_reports(const std::vector<MetricsReport>& reports)
{
    // Keyed by (sparsity, method) in order of first appearance.
    std::vector<AggregateRow> rows;
    std::vector<std::vector<const MetricsReport*>> members;
    for (const MetricsReport& r : reports) {
        auto it = std::find_if(rows.begin(), rows.end(),
                               [&](const AggregateRow& a) { return a.method == r.method && a.sparsity == r.sparsity; });
        std::size_t idx = static_cast<std::size_t>(it - rows.begin());
        if (it == rows.end()) {
            AggregateRow a;
            a.method = r.method;
            a.sparsity = r.sparsity;
            rows.push_back(a);
            members.emplace_back();
        }
        if (r.ok)
            members[idx].push_back(&r);
        else
            ++rows[idx].failures;
    }

    const auto summarize = [](const std::vector<const MetricsReport*>& ms, auto field) {
        MetricSummary s;
        if (ms.empty()) {
            s.mean = std::nan("");
            s.sd = std::nan("");
            return s;
        }
        double sum = 0.0;
        for (const auto* m : ms)
            sum += field(*m);
        s.mean = sum / static_cast<double>(ms.size());
        if (ms.size() > 1) {
            double ss = 0.0;
            for (const auto* m : ms)
                ss += (field(*m) - s.mean) * (field(*m) - s.mean);
            s.sd = std::sqrt(ss / static_cast<double>(ms.size() - 1));
        }
        return s;
    };

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& ms = members[i];
        AggregateRow& a = rows[i];
        a.count = static_cast<Index>(ms.size());
        a.test_mse = summarize(ms, [](const MetricsReport& m) { return m.test_mse; });
        a.precision = summarize(ms, [](const MetricsReport& m) { return m.precision; });
        a.recall = summarize(ms, [](const MetricsReport& m) { return m.recall; });
        a.l1 = summarize(ms, [](const MetricsReport& m) { return m.l1; });
        a.l2 = summarize(ms, [](const MetricsReport& m) { return m.l2; });
        a.pdr = summarize(ms, [](const MetricsReport& m) { return m.pdr; });
        a.fdr = summarize(ms, [](const MetricsReport& m) { return m.fdr; });
        a.nne = summarize(ms, [](const MetricsReport& m) { return static_cast<double>(m.nne); });
        a.time_seconds = summarize(ms, [](const MetricsReport& m) { return m.time_seconds; });
    }
    return rows;
}

std::string display_name(Method m)
{
    switch (m) {
    case Method::nbslasso:
        return "NBSlasso";
    case Method::lasso:
        return "Lasso";
    case Method::enet:
        return "ElasticNet";
    case Method::single_block_ols:
        return "BlockOLS";
    case Method::single_block_screened:
        return "BlockScreenedOLS";
    }
    return "?";
}

namespace {

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace

std::string replications_csv(const std::vector<MetricsReport>& reports)
{
    std::ostringstream os;
    os << "replication,seed,sparsity,method,test_mse,precision,recall,l1,l2,pdr,fdr,nne,time_seconds,ok,error\n";
    for (const MetricsReport& r : reports) {
        os << r.replication << ',' << r.seed << ',' << fmt("%.17g", r.sparsity) << ',' << r.method << ','
           << fmt("%.17g", r.test_mse) << ',' << fmt("%.17g", r.precision) << ',' << fmt("%.17g", r.recall) << ','
           << fmt("%.17g", r.l1) << ',' << fmt("%.17g", r.l2) << ',' << fmt("%.17g", r.pdr) << ','
           << fmt("%.17g", r.fdr) << ',' << r.nne << ',' << fmt("%.17g", r.time_seconds) << ',' << (r.ok ? 1 : 0)
           << ',' << csv_escape(r.error) << '\n';
    }
    return os.str();
}

std::string aggregate_table(const std::vector<AggregateRow>& rows)
{
    const std::vector<std::string> header{"Sparsity", "Method", "TestMSE", "Precision", "Recall",
                                          "L1",       "L2",     "PDR",     "FDR",       "Time(s)"};
    std::vector<std::vector<std::string>> cells;
    cells.push_back(header);
    const auto cell = [](const MetricSummary& s, const char* f) {
        return fmt(f, s.mean) + "(" + fmt(f, s.sd) + ")";
    };
    for (const AggregateRow& a : rows) {
        std::string method = a.method;
        try {
            method = display_name(parse_method(a.method));
        } catch (const ConfigError&) {
        }
        cells.push_back({fmt("%g", a.sparsity), method, cell(a.test_mse, "%.3f"), cell(a.precision, "%.2f"),
                         cell(a.recall, "%.2f"), cell(a.l1, "%.2f"), cell(a.l2, "%.2f"), cell(a.pdr, "%.2f"),
                         cell(a.fdr, "%.2f"), cell(a.time_seconds, "%.2f")});
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c)
            width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            os << row[c];
            if (c + 1 < row.size())
                os << std::string(width[c] - row[c].size() + 2, ' ');
        }
        os << '\n';
    }
    return os.str();
}

} // namespace blocksel
