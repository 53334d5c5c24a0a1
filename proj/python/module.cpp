#include <blocksel/blockmodel.hpp>
#include <blocksel/errors.hpp>
#include <blocksel/estimators.hpp>
#include <blocksel/linalg.hpp>
#include <blocksel/parallel.hpp>
#include <blocksel/simbench.hpp>
#include <blocksel/solver.hpp>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace blocksel;

namespace {

py::dict indicator_dict(const IndicatorMatrix& ind)
{
    py::dict d;
    d["delta"] = ind.delta;
    d["c_hat"] = ind.c_hat;
    d["gamma_hat"] = ind.gamma_hat;
    d["alpha"] = ind.alpha;
    d["feasible"] = ind.feasible;
    d["active"] = ind.active;
    return d;
}

py::dict fit_dict(const FitResult& fit)
{
    py::dict d;
    d["method"] = method_name(fit.method);
    d["coefficients"] = fit.coefficients;
    d["indicator"] = indicator_dict(fit.indicator);
    d["lambdas"] = fit.lambda_used;
    d["elapsed_seconds"] = fit.elapsed_seconds;
    d["warnings"] = fit.warnings;
    if (fit.r2bar) d["r2bar"] = *fit.r2bar;
    return d;
}

LambdaSelection lambda_selection(const std::string& mode, std::optional<double> lambda, std::optional<double> m3,
                                 int folds, std::uint64_t seed)
{
    LambdaSelection sel;
    sel.cv.folds = folds;
    sel.cv.seed = seed;
    if (mode == "cv") {
        sel.mode = LambdaMode::cv;
    } else if (mode == "fixed") {
        if (!lambda) throw ConfigError("lambda_mode 'fixed' needs lam");
        sel.mode = LambdaMode::fixed;
        sel.lambda = *lambda;
    } else if (mode == "theory") {
        if (!m3) throw ConfigError("lambda_mode 'theory' needs m3");
        sel.mode = LambdaMode::theory;
        sel.m3 = *m3;
    } else {
        throw ConfigError("lambda_mode must be cv, fixed or theory");
    }
    return sel;
}

ScreenPolicy screen_policy(const std::string& mode, int folds, std::uint64_t seed)
{
    ScreenPolicy p;
    p.cv.folds = folds;
    p.cv.seed = seed;
    if (mode == "auto") p.mode = ScreenMode::automatic;
    else if (mode == "always") p.mode = ScreenMode::always;
    else if (mode == "never") p.mode = ScreenMode::never;
    else throw ConfigError("screen must be auto, always or never");
    return p;
}

py::dict report_dict(const MetricsReport& r)
{
    py::dict d;
    d["method"] = r.method;
    d["replication"] = r.replication;
    d["seed"] = r.seed;
    d["sparsity"] = r.sparsity;
    d["test_mse"] = r.test_mse;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["l1"] = r.l1;
    d["l2"] = r.l2;
    d["pdr"] = r.pdr;
    d["fdr"] = r.fdr;
    d["nne"] = r.nne;
    d["time_seconds"] = r.time_seconds;
    d["ok"] = r.ok;
    d["error"] = r.error;
    return d;
}

} // namespace

PYBIND11_MODULE(_blocksel, m)
{
    m.doc() = "Block selection and block-restricted lasso for multi-response regression";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("set_threads", [](unsigned n) { set_thread_count(n); }, py::arg("n"),
          "Worker threads for per-block and per-column loops (0 = all cores).");

    m.def(
        "standardize",
        [](const Matrix& a) {
            const Standardized s = standardize(a);
            return py::make_tuple(s.data, s.centers, s.scales);
        },
        py::arg("a"), "Centre and scale columns; returns (data, centers, scales).");

    m.def(
        "block_r2bar",
        [](const Matrix& X, const Matrix& Y, std::vector<Index> cov, std::vector<Index> resp, const std::string& screen,
           int folds, std::uint64_t seed) {
            const GroupSpec g(std::move(cov), std::move(resp));
            return all_block_stats(X, Y, g, screen_policy(screen, folds, seed)).r2bar();
        },
        py::arg("X"), py::arg("Y"), py::arg("covariate_sizes"), py::arg("response_sizes"), py::arg("screen") = "auto",
        py::arg("folds") = 5, py::arg("seed") = 0);

    m.def(
        "select_threshold", [](const Matrix& r2bar, double alpha) { return indicator_dict(select_threshold(r2bar, alpha)); },
        py::arg("r2bar"), py::arg("alpha") = default_alpha);

    m.def(
        "er_bound",
        [](const std::vector<double>& r2bar, double c) { return er_bound(r2bar, c); }, py::arg("r2bar"), py::arg("c"));

    m.def(
        "nbslasso",
        [](const Matrix& X, const Matrix& Y, std::vector<Index> cov, std::vector<Index> resp, double alpha,
           const std::string& lambda_mode, std::optional<double> lam, std::optional<double> m3, int folds,
           std::uint64_t seed) {
            const GroupSpec g(std::move(cov), std::move(resp));
            NbsOptions o;
            o.alpha = alpha;
            o.screen = screen_policy("auto", folds, seed);
            o.lambda = lambda_selection(lambda_mode, lam, m3, folds, seed);
            return fit_dict(nbslasso_fit(X, Y, g, o));
        },
        py::arg("X"), py::arg("Y"), py::arg("covariate_sizes"), py::arg("response_sizes"),
        py::arg("alpha") = default_alpha, py::arg("lambda_mode") = "cv", py::arg("lam") = py::none(),
        py::arg("m3") = py::none(), py::arg("folds") = 5, py::arg("seed") = 1);

    m.def(
        "baseline",
        [](const Matrix& X, const Matrix& Y, std::vector<Index> cov, std::vector<Index> resp,
           const std::string& method, double mix, const std::string& lambda_mode, std::optional<double> lam,
           std::optional<double> m3, int folds, std::uint64_t seed) {
            const GroupSpec g(std::move(cov), std::move(resp));
            BaselineOptions o;
            o.enet_mix = mix;
            o.lambda = lambda_selection(lambda_mode, lam, m3, folds, seed);
            return fit_dict(baseline_fit(X, Y, g, parse_method(method), o));
        },
        py::arg("X"), py::arg("Y"), py::arg("covariate_sizes"), py::arg("response_sizes"),
        py::arg("method") = "lasso", py::arg("mix") = default_enet_mix, py::arg("lambda_mode") = "cv",
        py::arg("lam") = py::none(), py::arg("m3") = py::none(), py::arg("folds") = 5, py::arg("seed") = 1);

    m.def(
        "single_block_ols", [](const Matrix& X, const Matrix& Y, double gamma) { return fit_dict(single_block_ols(X, Y, gamma)); },
        py::arg("X"), py::arg("Y"), py::arg("gamma"));

    m.def(
        "single_block_screened",
        [](const Matrix& X, const Matrix& Y, double gamma, int folds, std::uint64_t seed) {
            return fit_dict(single_block_screened(X, Y, gamma, screen_policy("always", folds, seed)));
        },
        py::arg("X"), py::arg("Y"), py::arg("gamma"), py::arg("folds") = 5, py::arg("seed") = 0);

    m.def(
        "lasso",
        [](const Matrix& X, const Vector& y, double lam, double mix, double tol) {
            PenaltySpec pen;
            pen.lambda = lam;
            pen.mix = mix;
            pen.tol = tol;
            const LassoFit f = lasso_cd(X, y, pen);
            py::dict d;
            d["coefficients"] = f.coefficients;
            d["objective"] = f.objective;
            d["iterations"] = f.iterations;
            d["converged"] = f.converged;
            d["kkt"] = kkt_violation(X, y, f.coefficients, pen);
            return d;
        },
        py::arg("X"), py::arg("y"), py::arg("lam"), py::arg("mix") = 1.0, py::arg("tol") = PenaltySpec{}.tol,
        "Elastic-net coordinate descent on (1/2n)|y - Xb|^2 + lam (mix |b|_1 + (1 - mix)/2 |b|^2).");

    m.def(
        "lambda_max", [](const Matrix& X, const Vector& y, double mix) { return lambda_max(X, y, mix); }, py::arg("X"),
        py::arg("y"), py::arg("mix") = 1.0);

    m.def(
        "simulate",
        [](const std::string& spec_json) {
            const SimulatedData d = generate(simulation_spec_from_json(spec_json));
            py::dict out;
            out["X_train"] = d.X_train;
            out["Y_train"] = d.Y_train;
            out["X_test"] = d.X_test;
            out["Y_test"] = d.Y_test;
            out["B"] = d.truth.B;
            out["delta"] = d.truth.delta;
            out["covariate_sizes"] = d.groups.covariate_sizes();
            out["response_sizes"] = d.groups.response_sizes();
            return out;
        },
        py::arg("spec_json"));

    m.def(
        "benchmark",
        [](const std::string& spec_json, const std::vector<std::string>& methods, Index replications,
           std::uint64_t base_seed) {
            std::vector<Method> ms;
            for (const std::string& name : methods) ms.push_back(parse_method(name));
            const BenchmarkResult res = run_benchmark(simulation_spec_from_json(spec_json), ms, replications, base_seed);
            py::list out;
            for (const MetricsReport& r : res.reports) out.append(report_dict(r));
            return py::make_tuple(out, aggregate_table(res.aggregate));
        },
        py::arg("spec_json"), py::arg("methods"), py::arg("replications") = 1, py::arg("base_seed") = 1);
}
