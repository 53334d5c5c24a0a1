// blocksel command-line front end: simulate, select, fit, benchmark.
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <blocksel/blockmodel.hpp>
#include <blocksel/errors.hpp>
#include <blocksel/estimators.hpp>
#include <blocksel/groups.hpp>
#include <blocksel/io.hpp>
#include <blocksel/parallel.hpp>
#include <blocksel/simbench.hpp>

namespace fs = std::filesystem;
using namespace blocksel;
using json = nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

struct RunConfig
{
    std::string x_path;
    std::string y_path;
    std::string groups;  // JSON file path
    std::string covariate_sizes;
    std::string response_sizes;
    std::string out = ".";
    double alpha = default_alpha;
    std::string method = "nbslasso";
    std::string lambda_mode = "cv";
    double lambda = -1.0;
    double m3 = 0.0;
    double mix = default_enet_mix;
    int folds = 5;
    std::uint64_t seed = 1;
    bool seed_given = false;
    int threads = -1;
    bool unstandardize = false;
    std::string config;
    // benchmark
    int replications = 0;
    std::optional<std::uint64_t> base_seed;
    std::string methods;
};

using Files = std::vector<std::pair<fs::path, std::string>>;

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json number_or_null(double v)
{
    if (std::isfinite(v)) return v;
    return nullptr;
}

/// Values from --config fill every option that was not given on the command line.
void apply_config(CLI::App& sub, RunConfig& rc)
{
    if (rc.config.empty()) return;
    json j;
    try {
        j = json::parse(read_text_file(rc.config));
    } catch (const json::exception& e) {
        throw ConfigError("config '" + rc.config + "': " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config '" + rc.config + "' must be a JSON object");

    const auto unset = [&](const char* flag) {
        const CLI::Option* opt = sub.get_option_no_throw(flag);
        return opt != nullptr && opt->count() == 0;
    };
    const std::map<std::string, std::pair<const char*, std::function<void(const json&)>>> keys{
        {"x", {"--x", [&](const json& v) { rc.x_path = v.get<std::string>(); }}},
        {"y", {"--y", [&](const json& v) { rc.y_path = v.get<std::string>(); }}},
        {"groups", {"--groups", [&](const json& v) { rc.groups = v.get<std::string>(); }}},
        {"covariate_sizes", {"--covariate-sizes", [&](const json& v) { rc.covariate_sizes = v.get<std::string>(); }}},
        {"response_sizes", {"--response-sizes", [&](const json& v) { rc.response_sizes = v.get<std::string>(); }}},
        {"out", {"--out", [&](const json& v) { rc.out = v.get<std::string>(); }}},
        {"alpha", {"--alpha", [&](const json& v) { rc.alpha = v.get<double>(); }}},
        {"method", {"--method", [&](const json& v) { rc.method = v.get<std::string>(); }}},
        {"lambda_mode", {"--lambda-mode", [&](const json& v) { rc.lambda_mode = v.get<std::string>(); }}},
        {"lambda", {"--lambda", [&](const json& v) { rc.lambda = v.get<double>(); }}},
        {"m3", {"--m3", [&](const json& v) { rc.m3 = v.get<double>(); }}},
        {"mix", {"--mix", [&](const json& v) { rc.mix = v.get<double>(); }}},
        {"folds", {"--folds", [&](const json& v) { rc.folds = v.get<int>(); }}},
        {"seed", {"--seed", [&](const json& v) { rc.seed = v.get<std::uint64_t>(); }}},
        {"threads", {"--threads", [&](const json& v) { rc.threads = v.get<int>(); }}},
        {"unstandardize", {"--unstandardize", [&](const json& v) { rc.unstandardize = v.get<bool>(); }}},
    };
    for (const auto& [key, value] : j.items()) {
        const auto it = keys.find(key);
        if (it == keys.end()) continue;  // other subcommands' keys are allowed
        if (!unset(it->second.first)) continue;
        try {
            it->second.second(value);
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }
}

void configure_threads(const RunConfig& rc)
{
    int threads = rc.threads;
    if (threads < 0) {
        if (const char* env = std::getenv("BLOCKSEL_THREADS")) {
            try {
                threads = std::stoi(env);
            } catch (const std::exception&) {
                throw ConfigError(std::string("BLOCKSEL_THREADS is not an integer: '") + env + "'");
            }
        }
    }
    if (threads < 0) threads = 0;
    set_thread_count(static_cast<unsigned>(threads));
}

GroupSpec load_groups(const RunConfig& rc)
{
    if (!rc.groups.empty()) {
        if (!rc.covariate_sizes.empty() || !rc.response_sizes.empty())
            throw ConfigError("give either --groups or --covariate-sizes/--response-sizes, not both");
        return group_spec_from_json(read_text_file(rc.groups));
    }
    if (rc.covariate_sizes.empty() || rc.response_sizes.empty())
        throw ConfigError("a group spec is required: --groups FILE or --covariate-sizes and --response-sizes");
    return GroupSpec(parse_sizes(rc.covariate_sizes), parse_sizes(rc.response_sizes));
}

struct Inputs
{
    Standardized x;
    Standardized y;
    GroupSpec groups;
};

Inputs load_inputs(const RunConfig& rc)
{
    if (rc.x_path.empty() || rc.y_path.empty()) throw ConfigError("--x and --y are required");
    if (!(rc.alpha > 0.0 && rc.alpha < 1.0)) throw ConfigError("--alpha must lie in (0, 1)");
    const Matrix X = read_csv_matrix(rc.x_path);
    const Matrix Y = read_csv_matrix(rc.y_path);
    GroupSpec g = load_groups(rc);
    if (X.rows() != Y.rows())
        throw ConfigError("X has " + std::to_string(X.rows()) + " rows but Y has " + std::to_string(Y.rows()));
    try {
        g.check_against(X.cols(), Y.cols());
    } catch (const DimensionError& e) {
        throw ConfigError(e.what());
    }
    return {standardize(X), standardize(Y), std::move(g)};
}

ScreenPolicy screen_policy(const RunConfig& rc)
{
    ScreenPolicy p;
    p.cv.folds = rc.folds;
    p.cv.seed = rc.seed;
    return p;
}

LambdaSelection lambda_selection(const RunConfig& rc)
{
    LambdaSelection sel;
    sel.cv.folds = rc.folds;
    sel.cv.seed = rc.seed;
    if (rc.lambda_mode == "cv") {
        sel.mode = LambdaMode::cv;
    } else if (rc.lambda_mode == "fixed") {
        // A fixed lambda is either given directly or derived from the M3 rule.
        if (rc.lambda >= 0.0) {
            sel.mode = LambdaMode::fixed;
            sel.lambda = rc.lambda;
        } else if (rc.m3 > 0.0) {
            sel.mode = LambdaMode::theory;
            sel.m3 = rc.m3;
        } else {
            throw ConfigError("--lambda-mode fixed needs --lambda or --m3");
        }
    } else {
        throw ConfigError("--lambda-mode must be cv or fixed");
    }
    return sel;
}

json indicator_json(const IndicatorMatrix& ind)
{
    json active = json::array();
    for (const auto& [k, j] : ind.active) active.push_back({k + 1, j + 1});
    return {{"c_hat", number_or_null(ind.c_hat)},
            {"gamma_hat", number_or_null(ind.gamma_hat)},
            {"alpha", number_or_null(ind.alpha)},
            {"feasible", ind.feasible},
            {"selected", ind.selected()},
            {"active_blocks", active}};
}

void commit(const RunConfig& rc, const Files& files)
{
    std::error_code ec;
    fs::create_directories(rc.out, ec);
    if (ec) throw ConfigError("cannot create output directory '" + rc.out + "': " + ec.message());
    write_files_atomic(files);
}

fs::path out_file(const RunConfig& rc, const char* name) { return fs::path(rc.out) / name; }

int cmd_select(const RunConfig& rc)
{
    const Inputs in = load_inputs(rc);
    const BlockGrid grid = all_block_stats(in.x.data, in.y.data, in.groups, screen_policy(rc));
    const IndicatorMatrix ind = select_threshold(grid, rc.alpha);

    json summary = indicator_json(ind);
    summary["K"] = in.groups.K();
    summary["J"] = in.groups.J();
    summary["n"] = in.x.data.rows();
    if (ind.selected() == 0) summary["note"] = "no block passed ER <= alpha";
    json screened = json::array();
    for (const BlockStats& s : grid.cells())
        if (s.screened_support) screened.push_back({{"k", s.k + 1}, {"j", s.j + 1}, {"effective_p", s.effective_p}});
    summary["screened_blocks"] = screened;

    commit(rc, {{out_file(rc, "delta.csv"), format_csv_matrix(ind.delta)},
                {out_file(rc, "r2bar.csv"), format_csv_matrix(grid.r2bar())},
                {out_file(rc, "summary.json"), dump(summary)}});
    std::cout << "selected " << ind.selected() << " of " << in.groups.K() * in.groups.J() << " blocks";
    if (ind.selected() == 0) std::cout << " (no block passed ER <= alpha)";
    std::cout << "\n";
    return exit_ok;
}

int cmd_fit(const RunConfig& rc)
{
    const Inputs in = load_inputs(rc);
    const Method method = parse_method(rc.method);
    FitResult fit;
    if (method == Method::nbslasso) {
        NbsOptions o;
        o.alpha = rc.alpha;
        o.screen = screen_policy(rc);
        o.lambda = lambda_selection(rc);
        fit = nbslasso_fit(in.x.data, in.y.data, in.groups, o);
    } else if (method == Method::lasso || method == Method::enet) {
        BaselineOptions o;
        o.enet_mix = rc.mix;
        o.lambda = lambda_selection(rc);
        fit = baseline_fit(in.x.data, in.y.data, in.groups, method, o);
    } else {
        throw ConfigError("--method must be nbslasso, lasso or enet");
    }
    const StandardizationInfo info{in.x.centers, in.x.scales, in.y.centers, in.y.scales};

    Matrix lambdas(static_cast<Index>(fit.lambda_used.size()), 1);
    for (std::size_t q = 0; q < fit.lambda_used.size(); ++q) lambdas(static_cast<Index>(q), 0) = fit.lambda_used[q];

    json meta{{"method", method_name(method)},
              {"elapsed_seconds", fit.elapsed_seconds},
              {"n", in.x.data.rows()},
              {"P", in.groups.P()},
              {"Q", in.groups.Q()},
              {"lambda_mode", rc.lambda_mode},
              {"seed", rc.seed},
              {"unstandardized", rc.unstandardize},
              {"indicator", indicator_json(fit.indicator)},
              {"warnings", fit.warnings}};

    Files files;
    if (rc.unstandardize) {
        const Matrix raw = unstandardize_coefficients(fit.coefficients, info);
        files.emplace_back(out_file(rc, "B_hat.csv"), format_csv_matrix(raw));
        files.emplace_back(out_file(rc, "intercept.csv"),
                           format_csv_matrix(Matrix(unstandardized_intercepts(raw, info).transpose())));
    } else {
        files.emplace_back(out_file(rc, "B_hat.csv"), format_csv_matrix(fit.coefficients));
    }
    files.emplace_back(out_file(rc, "delta.csv"), format_csv_matrix(fit.indicator.delta));
    files.emplace_back(out_file(rc, "lambda.csv"), format_csv_matrix(lambdas));
    files.emplace_back(out_file(rc, "fit.json"), dump(meta));
    commit(rc, files);
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << method_name(method) << ": " << fit.indicator.selected() << " active blocks, "
              << (fit.coefficients.array() != 0.0).count() << " nonzero coefficients, " << fit.elapsed_seconds
              << " s\n";
    return exit_ok;
}

int cmd_simulate(const RunConfig& rc)
{
    if (rc.config.empty()) throw ConfigError("simulate needs --config SPEC.json");
    json j = json::parse(read_text_file(rc.config), nullptr, false);
    if (j.is_discarded()) throw ConfigError("config '" + rc.config + "' is not valid JSON");
    SimulationSpec spec = simulation_spec_from_json((j.contains("simulation") ? j["simulation"] : j).dump());
    if (rc.seed_given) spec.seed = rc.seed;

    const SimulatedData d = generate(spec);
    commit(rc, {{out_file(rc, "X_train.csv"), format_csv_matrix(d.X_train)},
                {out_file(rc, "Y_train.csv"), format_csv_matrix(d.Y_train)},
                {out_file(rc, "X_test.csv"), format_csv_matrix(d.X_test)},
                {out_file(rc, "Y_test.csv"), format_csv_matrix(d.Y_test)},
                {out_file(rc, "B_true.csv"), format_csv_matrix(d.truth.B)},
                {out_file(rc, "delta_true.csv"), format_csv_matrix(d.truth.delta)},
                {out_file(rc, "groups.json"), group_spec_to_json(d.groups) + "\n"},
                {out_file(rc, "spec.json"), simulation_spec_to_json(spec) + "\n"}});
    std::cout << "wrote " << spec.n << " training and " << spec.n_test << " test rows, "
              << d.truth.delta.sum() << " active blocks\n";
    return exit_ok;
}

std::vector<Method> parse_methods(const std::string& text)
{
    std::vector<Method> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_method(item));
    if (out.empty()) throw ConfigError("no methods given");
    return out;
}

int cmd_benchmark(const RunConfig& rc)
{
    if (rc.config.empty()) throw ConfigError("benchmark needs --config SPEC.json");
    json j = json::parse(read_text_file(rc.config), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config '" + rc.config + "' is not a JSON object");
    const bool wrapped = j.contains("simulation");
    const SimulationSpec spec = simulation_spec_from_json((wrapped ? j["simulation"] : j).dump());

    std::vector<Method> methods{Method::nbslasso, Method::lasso, Method::enet};
    Index replications = 1;
    std::uint64_t base_seed = spec.seed;
    BenchmarkOptions opts;
    try {
        if (wrapped && j.contains("methods")) {
            methods.clear();
            for (const auto& m : j["methods"]) methods.push_back(parse_method(m.get<std::string>()));
        }
        if (wrapped) replications = j.value("replications", replications);
        if (wrapped) base_seed = j.value("base_seed", base_seed);
        opts.nbs.alpha = j.value("alpha", rc.alpha);
        opts.baseline.enet_mix = j.value("mix", rc.mix);
        const int folds = j.value("folds", rc.folds);
        opts.nbs.lambda.cv.folds = folds;
        opts.nbs.screen.cv.folds = folds;
        opts.baseline.lambda.cv.folds = folds;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("benchmark config: ") + e.what());
    }
    if (!rc.methods.empty()) methods = parse_methods(rc.methods);
    if (rc.replications > 0) replications = rc.replications;
    if (rc.base_seed) base_seed = *rc.base_seed;
    if (!(opts.nbs.alpha > 0.0 && opts.nbs.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");

    const BenchmarkResult res = run_benchmark(spec, methods, replications, base_seed, opts);
    const std::string table = aggregate_table(res.aggregate);
    commit(rc, {{out_file(rc, "replications.csv"), replications_csv(res.reports)},
                {out_file(rc, "aggregate.txt"), table},
                {out_file(rc, "spec.json"), simulation_spec_to_json(spec) + "\n"}});
    std::cout << table;
    for (const MetricsReport& r : res.reports)
        if (!r.ok) std::cerr << "replication " << r.replication << " " << r.method << " failed: " << r.error << "\n";
    return exit_ok;
}

void add_common(CLI::App* sub, RunConfig& rc)
{
    sub->add_option("--out", rc.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", rc.seed, "Seed for folds and data generation")->capture_default_str();
    sub->add_option("--threads", rc.threads, "Worker threads (0 = all cores; falls back to BLOCKSEL_THREADS)");
    sub->add_option("--config", rc.config, "JSON configuration file");
    sub->add_option("--alpha", rc.alpha, "Error-rate level for block selection")->capture_default_str();
    sub->add_option("--folds", rc.folds, "Cross-validation folds")->capture_default_str();
    sub->add_option("--mix", rc.mix, "Elastic-net mixing weight (1 = lasso)")->capture_default_str();
}

void add_data(CLI::App* sub, RunConfig& rc)
{
    sub->add_option("--x", rc.x_path, "Covariate CSV (rows = observations, no header)");
    sub->add_option("--y", rc.y_path, "Response CSV (rows = observations, no header)");
    sub->add_option("--groups", rc.groups, "Group spec JSON {covariate_sizes, response_sizes}");
    sub->add_option("--covariate-sizes", rc.covariate_sizes, "Comma-separated covariate group sizes");
    sub->add_option("--response-sizes", rc.response_sizes, "Comma-separated response group sizes");
}

int run(int argc, char** argv)
{
    CLI::App app{"Block selection (NBS) and NBSlasso for multi-response regression"};
    app.require_subcommand(1);
    RunConfig rc;

    CLI::App* select = app.add_subcommand("select", "Score every block and select the non-zero ones");
    add_common(select, rc);
    add_data(select, rc);

    CLI::App* fit = app.add_subcommand("fit", "Fit NBSlasso or a lasso/elastic-net baseline");
    add_common(fit, rc);
    add_data(fit, rc);
    fit->add_option("--method", rc.method, "nbslasso, lasso or enet")->capture_default_str();
    fit->add_option("--lambda-mode", rc.lambda_mode, "cv or fixed")->capture_default_str();
    fit->add_option("--lambda", rc.lambda, "Fixed lambda on the (1/2n) loss scale");
    fit->add_option("--m3", rc.m3, "Fixed lambda from the rule M3 sqrt(n log P) when --lambda is absent");
    fit->add_flag("--unstandardize", rc.unstandardize, "Report coefficients and intercepts in data units");

    CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic data set");
    add_common(simulate, rc);

    CLI::App* bench = app.add_subcommand("benchmark", "Run replicated simulations and tabulate metrics");
    add_common(bench, rc);
    bench->add_option("--replications", rc.replications, "Replications (overrides the config)");
    bench->add_option("--base-seed", rc.base_seed, "Replication r uses base_seed + r");
    bench->add_option("--methods", rc.methods, "Comma-separated methods (overrides the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    CLI::App* active = app.get_subcommands().front();
    rc.seed_given = active->get_option("--seed")->count() > 0;
    if (active != simulate && active != bench) apply_config(*active, rc);
    configure_threads(rc);
    if (active == select) return cmd_select(rc);
    if (active == fit) return cmd_fit(rc);
    if (active == simulate) return cmd_simulate(rc);
    return cmd_benchmark(rc);
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return exit_numeric;
    }
}
