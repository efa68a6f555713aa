#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "isofuse/error.hpp"

namespace isofuse::simlab {

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
inline double quantile(std::vector<double> xs, double prob)
{
    if (xs.empty()) fail(Errc::invalid_argument, "quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

/// Squared errors of one function at its evaluation points.
struct FunctionErrors {
    std::vector<double> truth;
    std::vector<double> fitted;
};

inline double mean_squared_error(const FunctionErrors& e)
{
    if (e.truth.empty() || e.truth.size() != e.fitted.size()) fail(Errc::no_eval_points, "no evaluation points");
    double s = 0.0;
    for (std::size_t i = 0; i < e.truth.size(); ++i) s += (e.truth[i] - e.fitted[i]) * (e.truth[i] - e.fitted[i]);
    return s / static_cast<double>(e.truth.size());
}

/// Root of the average over functions of each function's mean squared error.
inline double rmse(std::span<const FunctionErrors> per_function)
{
    if (per_function.empty()) fail(Errc::no_eval_points, "no functions to evaluate");
    double s = 0.0;
    for (const auto& e : per_function) s += mean_squared_error(e);
    return std::sqrt(s / static_cast<double>(per_function.size()));
}

struct RatioSummary {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    /// Fraction of replications with R strictly below one.
    double p = 0.0;
};

inline RatioSummary summarize_ratios(std::span<const double> r)
{
    if (r.empty()) fail(Errc::invalid_argument, "no ratios to summarize");
    std::vector<double> v(r.begin(), r.end());
    RatioSummary s;
    s.median = quantile(v, 0.5);
    s.q1 = quantile(v, 0.25);
    s.q3 = quantile(v, 0.75);
    s.p = static_cast<double>(std::count_if(v.begin(), v.end(), [](double x) { return x < 1.0; })) /
          static_cast<double>(v.size());
    return s;
}

/// Summary of R = joint RMSE / separate RMSE over replications.
inline RatioSummary r_and_p(std::span<const double> joint, std::span<const double> separate)
{
    if (joint.size() != separate.size() || joint.empty()) fail(Errc::invalid_argument, "one RMSE pair per replication");
    std::vector<double> r(joint.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!(separate[i] > 0.0)) fail(Errc::degenerate_baseline, "separate fit has zero RMSE");
        r[i] = joint[i] / separate[i];
    }
    return summarize_ratios(r);
}

} // namespace isofuse::simlab
