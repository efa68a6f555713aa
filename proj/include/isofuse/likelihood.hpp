#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isofuse/design_poset.hpp"
#include "isofuse/error.hpp"
#include "isofuse/isotonic.hpp"

namespace isofuse {

enum class FamilyKind { gaussian, binomial };

/// Response distribution of one function. A Gaussian family without sigma2
/// means the variance is to be estimated from the data.
struct ModelFamily {
    FamilyKind kind = FamilyKind::gaussian;
    std::optional<double> sigma2;

    static ModelFamily gaussian(std::optional<double> sigma2 = std::nullopt) { return {FamilyKind::gaussian, sigma2}; }
    static ModelFamily binomial() { return {FamilyKind::binomial, std::nullopt}; }

    bool is_binomial() const noexcept { return kind == FamilyKind::binomial; }
};

/// One observed response. Binomial rows carry a success count and trials.
struct Observation {
    DesignPoint x;
    double response = 0.0;
    std::optional<int> trials;
};

struct Dataset {
    std::size_t function_id = 0;
    std::vector<Observation> rows;

    std::size_t size() const noexcept { return rows.size(); }
};

inline void validate_dataset(const Dataset& data, const ModelFamily& family)
{
    if (data.rows.empty()) fail(Errc::empty_group, "dataset " + std::to_string(data.function_id) + " is empty");
    const auto m = data.rows.front().x.dim();
    for (const auto& r : data.rows) {
        if (r.x.dim() != m) fail(Errc::dimension_mismatch, "rows differ in covariate dimension");
        if (!std::isfinite(r.response)) fail(Errc::invalid_argument, "non-finite response");
        if (family.is_binomial()) {
            if (!r.trials || *r.trials < 1) fail(Errc::invalid_argument, "binomial rows need trials >= 1");
            if (r.response < 0.0 || r.response > *r.trials) fail(Errc::range_error, "binomial count outside [0, trials]");
        }
    }
    if (family.kind == FamilyKind::gaussian && family.sigma2 && !(*family.sigma2 > 0.0)) {
        fail(Errc::invalid_argument, "sigma2 must be positive");
    }
}

/// Per-row weights of the least-squares isotonic problem: 1/σ² for Gaussian
/// rows and the trial count for binomial rows.
inline std::vector<double> iso_weights(const Dataset& data, const ModelFamily& family)
{
    validate_dataset(data, family);
    std::vector<double> w(data.size());
    if (family.is_binomial()) {
        for (std::size_t i = 0; i < data.size(); ++i) w[i] = static_cast<double>(*data.rows[i].trials);
    } else {
        if (!family.sigma2) fail(Errc::missing_nuisance, "Gaussian variance not supplied");
        std::fill(w.begin(), w.end(), 1.0 / *family.sigma2);
    }
    return w;
}

/// Per-row targets: responses, or observed proportions for binomial rows.
inline std::vector<double> iso_targets(const Dataset& data, const ModelFamily& family)
{
    std::vector<double> y(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data.rows[i];
        y[i] = family.is_binomial() ? r.response / *r.trials : r.response;
    }
    return y;
}

namespace detail {

inline double log_choose(int m, double y)
{
    const double k = std::round(y);
    return std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0);
}

// y·log(p) with 0·log 0 = 0.
inline double xlogy(double y, double p)
{
    if (y == 0.0) return 0.0;
    return y * std::log(p);
}

} // namespace detail

/// Log-likelihood of the rows given fitted means (Gaussian) or success
/// probabilities (binomial). The binomial coefficient is included.
inline double log_likelihood(const Dataset& data, std::span<const double> fitted, const ModelFamily& family)
{
    if (fitted.size() != data.size()) fail(Errc::invalid_argument, "fitted length differs from row count");
    double ll = 0.0;
    if (family.is_binomial()) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& r = data.rows[i];
            const int m = *r.trials;
            const double p = fitted[i];
            if (!(p >= 0.0 && p <= 1.0)) fail(Errc::invalid_argument, "binomial fitted value outside [0,1]");
            if ((p == 0.0 && r.response > 0.0) || (p == 1.0 && r.response < m)) {
                fail(Errc::degenerate_likelihood, "fitted probability contradicts observed counts");
            }
            ll += detail::xlogy(r.response, p) + detail::xlogy(m - r.response, 1.0 - p) + detail::log_choose(m, r.response);
        }
    } else {
        if (!family.sigma2) fail(Errc::missing_nuisance, "Gaussian variance not supplied");
        const double s2 = *family.sigma2;
        const double c = -0.5 * std::log(2.0 * std::numbers::pi * s2);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double r = data.rows[i].response - fitted[i];
            ll += c - r * r / (2.0 * s2);
        }
    }
    return ll;
}

/// Observations pooled per distinct design point.
struct PointSummary {
    DesignPoint x;
    double count = 0.0;
    double sum = 0.0;
};

inline std::vector<PointSummary> summarize_points(const Dataset& data)
{
    std::map<DesignPoint, PointSummary> acc;
    for (const auto& r : data.rows) {
        auto& s = acc[r.x];
        s.x = r.x;
        s.count += 1.0;
        s.sum += r.response;
    }
    std::vector<PointSummary> out;
    out.reserve(acc.size());
    for (auto& [x, s] : acc) out.push_back(std::move(s));
    return out;
}

/// Residual variance about the separate isotonic fit, divided by
/// n minus the number of distinct fitted levels.
inline double estimate_sigma2(const Dataset& data)
{
    if (data.size() < 2) fail(Errc::insufficient_data, "variance estimation needs at least two rows");
    validate_dataset(data, ModelFamily::gaussian(1.0));
    auto pts = summarize_points(data);
    std::vector<DesignPoint> xs;
    std::vector<double> y, w;
    for (const auto& p : pts) {
        xs.push_back(p.x);
        y.push_back(p.sum / p.count);
        w.push_back(p.count);
    }
    auto poset = build_poset(xs);
    auto fit = solve(IsotonicProblem::on(poset, y, w));
    double rss = 0.0;
    for (const auto& r : data.rows) {
        const double d = r.response - fit.values[*poset.find(r.x)];
        rss += d * d;
    }
    const auto n = static_cast<double>(data.size());
    const auto levels = static_cast<double>(fit.distinct_levels());
    const double dof = n > levels ? n - levels : std::max(1.0, n - 1.0);
    return std::max(rss / dof, 1e-8);
}

/// Gaussian likelihood-ratio statistic from residual sums of squares.
inline double lr_gaussian_shortcut(double rss_null, double rss_alt, double sigma2)
{
    if (!(sigma2 > 0.0)) fail(Errc::invalid_argument, "sigma2 must be positive");
    if (rss_null < rss_alt - 1e-10 * std::max(1.0, rss_alt)) {
        fail(Errc::null_beats_alternative, "constrained fit has smaller residual sum of squares");
    }
    return std::max(0.0, (rss_null - rss_alt) / sigma2);
}

} // namespace isofuse
