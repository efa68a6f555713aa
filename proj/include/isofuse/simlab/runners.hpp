#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "isofuse/borrowing.hpp"
#include "isofuse/chi_squared.hpp"
#include "isofuse/joint_estimator.hpp"
#include "isofuse/parallel.hpp"
#include "isofuse/sample.hpp"
#include "isofuse/simlab/metrics.hpp"
#include "isofuse/simlab/studies.hpp"

namespace isofuse::simlab {

struct RunOptions {
    unsigned threads = 1;
    /// Refit with the reversed sweep order and record the largest difference.
    bool verify_uniqueness = false;
    FitOptions fit{};
    bool cap_weights = false;
};

struct ReplicationResult {
    std::vector<double> rmse_joint;     // per function
    std::vector<double> rmse_separate;  // per function
    double overall_joint = 0.0;
    double overall_separate = 0.0;
    std::size_t sweeps = 0;
    bool converged = false;
    /// Largest increase between consecutive sweeps of the objective trace.
    double max_trace_increase = 0.0;
    /// Largest |forward − reversed| fitted value; NaN when not verified.
    double reverse_gap = std::numeric_limits<double>::quiet_NaN();
};

struct RatioStudyReport {
    StudyConfig config;
    std::vector<RatioSummary> per_function;
    RatioSummary overall;
    std::vector<ReplicationResult> replications;
};

/// Separate (no borrowing) fit of every function on its own observed nodes.
inline std::vector<std::vector<double>> separate_fits(const JointSample& s)
{
    PairTester tester(s);
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < s.K(); ++k) out.push_back(tester.separate_fit(k));
    return out;
}

/// Each function is scored at its own observed design points.
inline std::vector<FunctionErrors> errors_at_observed(const JointSample& s, const std::vector<TrueFunction>& truth,
                                                      const std::vector<std::vector<double>>& fitted)
{
    std::vector<FunctionErrors> out(s.K());
    for (std::size_t k = 0; k < s.K(); ++k) {
        for (auto i : s.functions[k].observed) {
            out[k].truth.push_back(truth[k](s.poset.point(i)));
            out[k].fitted.push_back(fitted[k][i]);
        }
    }
    return out;
}

inline ReplicationResult run_replication(const StudyConfig& c, std::size_t rep, const RunOptions& opt)
{
    auto g = generate(c, rep);
    auto s = align(g.datasets, g.families);
    auto sep = separate_fits(s);
    auto field = build_weight_field(s, {.alpha = c.alpha, .extrapolation_mask = true, .cap = opt.cap_weights, .threads = 1});
    auto jp = make_joint_problem(s, std::move(field));
    auto fit = fit_joint(jp, opt.fit);

    ReplicationResult r;
    r.sweeps = fit.iterations;
    r.converged = fit.converged;
    for (std::size_t t = 1; t < fit.objective_trace.size(); ++t) {
        r.max_trace_increase = std::max(r.max_trace_increase, fit.objective_trace[t] - fit.objective_trace[t - 1]);
    }
    if (opt.verify_uniqueness) {
        auto rev_opt = opt.fit;
        rev_opt.reverse_order = !rev_opt.reverse_order;
        auto rev = fit_joint(jp, rev_opt);
        r.reverse_gap = 0.0;
        for (std::size_t k = 0; k < jp.K(); ++k) {
            for (auto i : jp.active_sets[k]) {
                r.reverse_gap = std::max(r.reverse_gap, std::abs(fit.values[k][i] - rev.values[k][i]));
            }
        }
    }

    auto ej = errors_at_observed(jp.sample, g.truth, fit.values);
    auto es = errors_at_observed(jp.sample, g.truth, sep);
    for (std::size_t k = 0; k < ej.size(); ++k) {
        r.rmse_joint.push_back(std::sqrt(mean_squared_error(ej[k])));
        r.rmse_separate.push_back(std::sqrt(mean_squared_error(es[k])));
    }
    r.overall_joint = rmse(ej);
    r.overall_separate = rmse(es);
    return r;
}

inline RatioStudyReport run_ratio_study(const StudyConfig& c, const RunOptions& opt = {})
{
    if (is_quantile_study(c.study) || c.study == StudyId::PowerCurve) {
        fail(Errc::invalid_argument, "study does not produce R and P summaries");
    }
    if (c.replications < 1) fail(Errc::invalid_argument, "replications must be at least 1");
    RatioStudyReport report;
    report.config = c;
    report.replications.resize(c.replications);
    parallel_for(c.replications, opt.threads, [&](std::size_t rep) { report.replications[rep] = run_replication(c, rep, opt); });

    const auto K = report.replications.front().rmse_joint.size();
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> j, s;
        for (const auto& r : report.replications) {
            j.push_back(r.rmse_joint[k]);
            s.push_back(r.rmse_separate[k]);
        }
        report.per_function.push_back(r_and_p(j, s));
    }
    std::vector<double> j, s;
    for (const auto& r : report.replications) {
        j.push_back(r.overall_joint);
        s.push_back(r.overall_separate);
    }
    report.overall = r_and_p(j, s);
    return report;
}

inline constexpr std::array<double, 5> quantile_probs{0.5, 0.7, 0.8, 0.9, 0.95};

struct QuantileRow {
    std::string point;  // "x=1" or "25%"
    bool conditioned = false;
    std::size_t count = 0;
    std::array<double, 5> q{};
};

struct QuantileStudyReport {
    StudyConfig config;
    std::vector<QuantileRow> rows;
};

/// Index of the fixed design point 4i/n with the smallest i such that 4i/n ≥ x.
inline std::size_t fixed_design_index(std::size_t n, double x)
{
    auto i = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * x / 4.0 - 1e-12));
    return std::clamp<std::size_t>(i, 1, n);
}

inline QuantileRow quantile_row(std::string label, std::vector<double> lr, bool conditioned)
{
    QuantileRow row;
    row.point = std::move(label);
    row.conditioned = conditioned;
    if (conditioned) std::erase_if(lr, [](double v) { return !(v > 0.0); });
    row.count = lr.size();
    for (std::size_t j = 0; j < quantile_probs.size(); ++j) {
        row.q[j] = lr.empty() ? std::numeric_limits<double>::quiet_NaN() : quantile(lr, quantile_probs[j]);
    }
    return row;
}

/// Null distribution of the test statistic for two identical functions.
/// Fixed designs test at the design points nearest x = 1, 2, 3 from above;
/// random designs test at the empirical quartiles of the first sample, which
/// the second function does not observe.
inline QuantileStudyReport lr_quantile_study(const StudyConfig& c, const RunOptions& opt = {})
{
    if (!is_quantile_study(c.study)) fail(Errc::invalid_argument, "not a quantile study");
    const bool fixed = c.study == StudyId::LRQuantileFixed;
    const std::array<double, 3> where = fixed ? std::array<double, 3>{1.0, 2.0, 3.0} : std::array<double, 3>{0.25, 0.5, 0.75};
    std::vector<std::array<double, 3>> lr(c.replications);
    parallel_for(c.replications, opt.threads, [&](std::size_t rep) {
        auto g = generate(c, rep);
        auto s = align(g.datasets, g.families);
        PairTester tester(s);
        std::vector<double> x1;
        for (const auto& r : g.datasets[0].rows) x1.push_back(r.x[0]);
        std::sort(x1.begin(), x1.end());
        for (std::size_t j = 0; j < 3; ++j) {
            DesignPoint at;
            if (fixed) {
                at = DesignPoint{4.0 * fixed_design_index(c.n, where[j]) / c.n};
            } else {
                auto idx = static_cast<std::size_t>(std::ceil(where[j] * x1.size() - 1e-12));
                at = DesignPoint{x1[std::clamp<std::size_t>(idx, 1, x1.size()) - 1]};
            }
            lr[rep][j] = tester.test(0, 1, *s.poset.find(at), 0.5).lr;
        }
    });
    QuantileStudyReport report;
    report.config = c;
    for (std::size_t j = 0; j < 3; ++j) {
        std::vector<double> col;
        for (const auto& r : lr) col.push_back(r[j]);
        std::string label = fixed ? "x=" + std::to_string(static_cast<int>(where[j]))
                                  : std::to_string(static_cast<int>(where[j] * 100)) + "%";
        report.rows.push_back(quantile_row(label, col, false));
        if (!fixed) report.rows.push_back(quantile_row(label, col, true));
    }
    return report;
}

struct PowerPoint {
    double x = 0.0;
    double rejection = 0.0;
};

struct PowerStudyReport {
    StudyConfig config;
    double critical_value = 0.0;
    std::vector<PowerPoint> curve;
    double mean_rejection_identical = 0.0;  // x ≤ 2
    double min_rejection_far = 0.0;         // x > 2.5
};

/// Rejection frequency of the similarity test at every design point.
inline PowerStudyReport power_study(const StudyConfig& c, const RunOptions& opt = {})
{
    if (c.study != StudyId::PowerCurve) fail(Errc::invalid_argument, "not a power study");
    const double q = chi2_quantile_1df(1.0 - c.alpha);
    std::vector<std::vector<char>> reject(c.replications);
    std::vector<DesignPoint> xs;
    parallel_for(c.replications, opt.threads, [&](std::size_t rep) {
        auto g = generate(c, rep);
        auto s = align(g.datasets, g.families);
        PairTester tester(s);
        reject[rep].resize(s.n());
        for (std::size_t i = 0; i < s.n(); ++i) reject[rep][i] = tester.test(0, 1, i, c.alpha).lr > q;
    });
    PowerStudyReport report;
    report.config = c;
    report.critical_value = q;
    std::size_t near = 0, far = 0;
    report.min_rejection_far = 1.0;
    for (std::size_t i = 0; i < c.n; ++i) {
        double count = 0;
        for (const auto& r : reject) count += r[i];
        PowerPoint pt{4.0 * (i + 1) / c.n, count / static_cast<double>(c.replications)};
        if (pt.x <= 2.0) {
            report.mean_rejection_identical += pt.rejection;
            ++near;
        }
        if (pt.x > 2.5) {
            report.min_rejection_far = std::min(report.min_rejection_far, pt.rejection);
            ++far;
        }
        report.curve.push_back(pt);
    }
    if (near) report.mean_rejection_identical /= static_cast<double>(near);
    if (!far) report.min_rejection_far = std::numeric_limits<double>::quiet_NaN();
    return report;
}

} // namespace isofuse::simlab
