#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "isofuse/borrowing.hpp"
#include "isofuse/chi_squared.hpp"
#include "isofuse/error.hpp"
#include "isofuse/io/csv.hpp"
#include "isofuse/io/format.hpp"
#include "isofuse/joint_estimator.hpp"
#include "isofuse/parallel.hpp"
#include "isofuse/simlab/report.hpp"

namespace isofuse::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int {
    ok = 0,
    input_error = 1,
    unknown_study = 2,
    not_converged = 3,
    point_not_testable = 4,
};

struct RunConfig {
    std::string input;
    std::string family = "gaussian";
    std::optional<double> sigma2;
    double alpha = 0.1;
    double tol = 1e-8;
    std::size_t max_sweeps = 10000;
    bool cap_weights = false;
    std::string output;
    std::string format = "json";
    bool check_monotone_fit = false;
    unsigned threads = 0;

    // test
    std::string group_a, group_b;
    std::string point;

    // simulate / quantiles
    std::string study;
    std::optional<std::size_t> n;
    std::optional<double> study_alpha;
    std::optional<std::size_t> reps;
    std::uint64_t seed = 1;
    bool fast = false;
    bool verify_uniqueness = false;
    std::string csv_output;
};

namespace detail {

inline unsigned threads_of(const RunConfig& c) { return c.threads > 0 ? c.threads : default_threads(); }

inline void validate(const RunConfig& c)
{
    if (c.family != "gaussian" && c.family != "binomial") fail(Errc::invalid_argument, "family must be gaussian or binomial");
    if (c.sigma2 && c.family != "gaussian") fail(Errc::invalid_argument, "--sigma2 applies to the gaussian family only");
    if (c.sigma2 && !(*c.sigma2 > 0.0)) fail(Errc::invalid_argument, "--sigma2 must be positive");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail(Errc::domain_error, "--alpha must lie in (0,1)");
    if (!(c.tol > 0.0) || c.max_sweeps < 1) fail(Errc::invalid_argument, "--tol must be positive, --max-sweeps >= 1");
    if (c.format != "json" && c.format != "csv") fail(Errc::invalid_argument, "--format must be json or csv");
}

inline ModelFamily family_of(const RunConfig& c)
{
    return c.family == "binomial" ? ModelFamily::binomial() : ModelFamily::gaussian(c.sigma2);
}

inline void emit(const RunConfig& c, const std::string& text, std::ostream& out)
{
    if (c.output.empty() || c.output == "-") {
        out << text;
        return;
    }
    std::ofstream f(c.output, std::ios::binary);
    if (!f) fail(Errc::invalid_argument, "cannot write '" + c.output + "'");
    f << text;
}

inline Json point_json(const DesignPoint& x)
{
    Json a = Json::array();
    for (double v : x.coords) a.push_back(v);
    return a;
}

inline DesignPoint parse_point(const std::string& s)
{
    std::vector<double> coords;
    for (auto f : io::detail::split(s)) coords.push_back(io::detail::parse_number(f, 0, "point coordinate"));
    return DesignPoint(std::move(coords));
}

inline std::size_t group_index(const io::CsvData& d, const std::string& g)
{
    auto it = std::find(d.groups.begin(), d.groups.end(), g);
    if (it == d.groups.end()) fail(Errc::invalid_argument, "unknown group '" + g + "'");
    return static_cast<std::size_t>(it - d.groups.begin());
}

// Separate increasing and decreasing fits of one group, so a user can spot a
// covariate whose axis should have been reversed.
inline Json monotone_check(const JointSample& s, std::size_t k)
{
    const auto& f = s.functions[k];
    auto sub = s.poset.induced(f.observed);
    std::vector<double> y, w, neg;
    for (auto i : f.observed) {
        y.push_back(f.targets[i]);
        w.push_back(f.weights[i]);
        neg.push_back(-f.targets[i]);
    }
    auto up = solve(IsotonicProblem::on(sub, y, w));
    auto down = solve(IsotonicProblem::on(sub, neg, w));
    return Json{{"weighted_rss_increasing", up.objective},
                {"weighted_rss_decreasing", down.objective},
                {"levels_increasing", up.distinct_levels()},
                {"decreasing_fits_better", down.objective < up.objective}};
}

} // namespace detail

inline int cmd_fit(const RunConfig& c, std::ostream& out)
{
    detail::validate(c);
    auto data = io::read_csv_file(c.input, c.family == "binomial");
    std::vector<ModelFamily> fams(data.datasets.size(), detail::family_of(c));
    auto s = align(data.datasets, fams);
    auto field = build_weight_field(
        s, {.alpha = c.alpha, .extrapolation_mask = true, .cap = c.cap_weights, .threads = detail::threads_of(c)});
    auto jp = make_joint_problem(std::move(s), std::move(field));
    auto fit = fit_joint(jp, {.tol = c.tol, .max_sweeps = c.max_sweeps});
    const auto& sample = jp.sample;
    const auto K = jp.K();

    if (c.format == "csv") {
        std::ostringstream o;
        o << "group";
        for (std::size_t d = 0; d < data.dim; ++d) o << ",x" << d + 1;
        o << ",fitted,borrowed_only\n";
        for (std::size_t k = 0; k < K; ++k) {
            for (auto i : jp.active_sets[k]) {
                o << data.groups[k];
                for (double v : sample.poset.point(i).coords) o << ',' << io::fmt(v);
                o << ',' << io::fmt(fit.values[k][i]) << ',' << (fit.borrowed_only[k][i] ? "true" : "false") << '\n';
            }
        }
        detail::emit(c, o.str(), out);
        return fit.converged ? ok : not_converged;
    }

    Json j{{"schema", "isofuse-v1"}, {"kind", "fit"}};
    j["config"] = Json{{"input", c.input},      {"family", c.family},         {"alpha", c.alpha},
                       {"tol", c.tol},          {"max_sweeps", c.max_sweeps}, {"cap_weights", c.cap_weights}};
    Json groups = Json::array();
    for (std::size_t k = 0; k < K; ++k) {
        const auto& f = sample.functions[k];
        Json g{{"group", data.groups[k]}};
        if (!f.family.is_binomial()) g["sigma2"] = *f.family.sigma2;
        Json pts = Json::array();
        for (auto i : jp.active_sets[k]) {
            pts.push_back(Json{{"x", detail::point_json(sample.poset.point(i))},
                               {"fitted", fit.values[k][i]},
                               {"borrowed_only", static_cast<bool>(fit.borrowed_only[k][i])},
                               {"n_obs", static_cast<long long>(f.nodes[i].count)}});
        }
        g["points"] = std::move(pts);
        if (data.dim == 1) {
            // Active nodes come in union order, which is sorted along the line.
            Json knots = Json::array(), levels = Json::array();
            for (auto i : jp.active_sets[k]) {
                knots.push_back(sample.poset.point(i)[0]);
                levels.push_back(fit.values[k][i]);
            }
            g["step_function"] = Json{{"knots", std::move(knots)}, {"levels", std::move(levels)}};
        }
        if (c.check_monotone_fit) g["monotone_check"] = detail::monotone_check(sample, k);
        groups.push_back(std::move(g));
    }
    j["groups"] = std::move(groups);

    Json weights = Json::array(), tests = Json::array();
    for (const auto& t : jp.weights.tests()) {
        const auto& x = detail::point_json(sample.poset.point(t.t));
        weights.push_back(Json{{"group_a", data.groups[t.k]}, {"group_b", data.groups[t.p]}, {"x", x}, {"v", t.weight}});
        tests.push_back(Json{{"group_a", data.groups[t.k]},
                             {"group_b", data.groups[t.p]},
                             {"x", x},
                             {"lr", t.lr},
                             {"constrained_active", t.constrained_active}});
    }
    j["weights"] = std::move(weights);
    j["tests"] = std::move(tests);
    j["diagnostics"] = Json{{"converged", fit.converged},
                            {"sweeps", fit.iterations},
                            {"objective", fit.objective_trace.empty() ? 0.0 : fit.objective_trace.back()},
                            {"objective_trace", fit.objective_trace}};
    detail::emit(c, j.dump(2) + "\n", out);
    return fit.converged ? ok : not_converged;
}

inline int cmd_test(const RunConfig& c, std::ostream& out)
{
    detail::validate(c);
    auto data = io::read_csv_file(c.input, c.family == "binomial");
    const auto a = detail::group_index(data, c.group_a);
    const auto b = detail::group_index(data, c.group_b);
    if (a == b) fail(Errc::invalid_argument, "the two groups must differ");
    const auto x = detail::parse_point(c.point);
    auto s = align({data.datasets[a], data.datasets[b]}, {detail::family_of(c), detail::family_of(c)});
    auto t = s.poset.find(x);
    if (!t) fail(Errc::point_not_testable, "point is not in the design of either group");
    auto r = PairTester(s).test(0, 1, *t, c.alpha);
    const double q = chi2_quantile_1df(1.0 - c.alpha);
    const bool reject = r.lr > q;
    if (c.format == "csv") {
        std::ostringstream o;
        o << "group_a,group_b,lr,critical_value,decision,weight\n"
          << c.group_a << ',' << c.group_b << ',' << io::fmt(r.lr) << ',' << io::fmt(q) << ','
          << (reject ? "reject" : "retain") << ',' << io::fmt(r.weight) << '\n';
        detail::emit(c, o.str(), out);
    } else {
        Json j{{"schema", "isofuse-v1"},
               {"kind", "pair_test"},
               {"group_a", c.group_a},
               {"group_b", c.group_b},
               {"x", detail::point_json(x)},
               {"alpha", c.alpha},
               {"lr", r.lr},
               {"critical_value", q},
               {"decision", reject ? "reject" : "retain"},
               {"weight", r.weight},
               {"constrained_active", r.constrained_active}};
        detail::emit(c, j.dump(2) + "\n", out);
    }
    return ok;
}

inline simlab::StudyConfig study_config(const RunConfig& c)
{
    simlab::StudyConfig sc;
    sc.study = simlab::parse_study(c.study);
    using simlab::StudyId;
    const bool grid = sc.study == StudyId::TwoDimStudy1 || sc.study == StudyId::TwoDimStudy2 ||
                      sc.study == StudyId::TwoDimStudy1Modified;
    sc.n = c.n.value_or(sc.study == StudyId::PowerCurve ? 200 : simlab::is_quantile_study(sc.study) ? 50 : grid ? 10 : 100);
    sc.alpha = c.study_alpha.value_or(sc.study == StudyId::PowerCurve ? 0.05 : 0.1);
    sc.replications = c.reps.value_or(simlab::default_replications(sc.study, c.fast));
    sc.seed = c.seed;
    if (!(sc.alpha > 0.0 && sc.alpha < 1.0)) fail(Errc::domain_error, "--alpha must lie in (0,1)");
    if (sc.replications < 1 || sc.n < 1) fail(Errc::invalid_argument, "--n and --reps must be positive");
    return sc;
}

inline int cmd_simulate(const RunConfig& c, std::ostream& out)
{
    auto sc = study_config(c);
    simlab::RunOptions opt;
    opt.threads = detail::threads_of(c);
    opt.verify_uniqueness = c.verify_uniqueness;
    opt.fit = {.tol = c.tol, .max_sweeps = c.max_sweeps};
    opt.cap_weights = c.cap_weights;
    auto report = simlab::run_study(sc, opt);
    detail::emit(c, c.format == "csv" ? report.csv : report.json.dump(2) + "\n", out);
    if (!c.csv_output.empty()) {
        std::ofstream f(c.csv_output, std::ios::binary);
        if (!f) fail(Errc::invalid_argument, "cannot write '" + c.csv_output + "'");
        f << report.csv;
    }
    return ok;
}

inline int cmd_quantiles(const RunConfig& c, std::ostream& out)
{
    auto sc = study_config(c);
    if (!simlab::is_quantile_study(sc.study)) {
        fail(Errc::invalid_argument, "quantiles runs LRQuantileFixed or LRQuantileRandom");
    }
    return cmd_simulate(c, out);
}

inline int exit_code_for(const Error& e)
{
    switch (e.code()) {
    case Errc::unknown_study:
        return unknown_study;
    case Errc::point_not_testable:
        return point_not_testable;
    default:
        return input_error;
    }
}

/// Full command-line entry point; data goes to `out`, diagnostics to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Joint estimation of monotone regression functions with data-driven borrowing", "isofuse"};
    app.require_subcommand(1);
    RunConfig c;

    auto common_fit = [&](CLI::App* sub) {
        sub->add_option("input", c.input, "CSV file with header group,x1,...,xm,y[,trials]")->required();
        sub->add_option("--family", c.family, "gaussian or binomial")->capture_default_str();
        sub->add_option("--sigma2", c.sigma2, "known Gaussian variance (estimated per group if omitted)");
        sub->add_option("--alpha", c.alpha, "significance level of the similarity test")->capture_default_str();
        sub->add_option("--format", c.format, "json or csv")->capture_default_str();
        sub->add_option("-o,--output", c.output, "output file (default stdout)");
        sub->add_option("--threads", c.threads, "worker threads (default ISOFUSE_THREADS or all cores)");
    };
    auto fit = app.add_subcommand("fit", "fit all groups jointly");
    common_fit(fit);
    fit->add_option("--tol", c.tol, "convergence tolerance")->capture_default_str();
    fit->add_option("--max-sweeps", c.max_sweeps, "sweep limit")->capture_default_str();
    fit->add_flag("--cap-weights", c.cap_weights, "clamp fusion weights to 1/(K-1)");
    fit->add_flag("--check-monotone-fit", c.check_monotone_fit, "report increasing vs decreasing fit residuals");

    auto test = app.add_subcommand("test", "similarity test of two groups at one design point");
    common_fit(test);
    test->add_option("--a", c.group_a, "first group label")->required();
    test->add_option("--b", c.group_b, "second group label")->required();
    test->add_option("--point", c.point, "design point, comma separated coordinates")->required();

    auto study_opts = [&](CLI::App* sub) {
        sub->add_option("study", c.study, "study name")->required();
        sub->add_option("--n", c.n, "sample size (grid side for two-dimensional studies)");
        sub->add_option("--alpha", c.study_alpha, "significance level");
        sub->add_option("--reps", c.reps, "replications");
        sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
        sub->add_flag("--fast", c.fast, "reduced replication counts");
        sub->add_option("--format", c.format, "json or csv")->capture_default_str();
        sub->add_option("-o,--output", c.output, "output file (default stdout)");
        sub->add_option("--csv", c.csv_output, "also write the CSV table here");
        sub->add_option("--threads", c.threads, "worker threads (default ISOFUSE_THREADS or all cores)");
        sub->add_option("--tol", c.tol, "convergence tolerance")->capture_default_str();
        sub->add_option("--max-sweeps", c.max_sweeps, "sweep limit")->capture_default_str();
        sub->add_flag("--verify-uniqueness", c.verify_uniqueness, "refit with reversed sweep order");
        sub->add_flag("--cap-weights", c.cap_weights, "clamp fusion weights to 1/(K-1)");
    };
    auto simulate = app.add_subcommand("simulate", "run a simulation study");
    study_opts(simulate);
    auto quantiles = app.add_subcommand("quantiles", "null quantiles of the test statistic");
    study_opts(quantiles);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "isofuse: " << e.what() << "\n";
        return input_error;
    }

    try {
        if (*fit) {
            int rc = cmd_fit(c, out);
            if (rc == not_converged) err << "isofuse: joint fit did not converge within " << c.max_sweeps << " sweeps\n";
            return rc;
        }
        if (*test) return cmd_test(c, out);
        if (*simulate) return cmd_simulate(c, out);
        if (*quantiles) return cmd_quantiles(c, out);
    } catch (const Error& e) {
        err << "isofuse: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "isofuse: " << e.what() << "\n";
        return input_error;
    }
    return input_error;
}

} // namespace isofuse::cli
