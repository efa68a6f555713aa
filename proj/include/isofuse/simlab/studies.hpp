#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "isofuse/error.hpp"
#include "isofuse/likelihood.hpp"
#include "isofuse/simlab/rng.hpp"

namespace isofuse::simlab {

enum class StudyId {
    LRQuantileFixed,
    LRQuantileRandom,
    PowerCurve,
    Sensitivity1,
    Sensitivity2,
    Sensitivity3,
    FiveFunctionFixed,
    TwoDimStudy1,
    TwoDimStudy2,
    TwoDimStudy1Modified,
    BinomialK2,
    BinomialK4Balanced,
    BinomialK4Unbalanced,
    FiveFunctionRandom1,
    FiveFunctionRandom2,
};

inline constexpr std::array<std::pair<StudyId, std::string_view>, 15> study_names{{
    {StudyId::LRQuantileFixed, "LRQuantileFixed"},
    {StudyId::LRQuantileRandom, "LRQuantileRandom"},
    {StudyId::PowerCurve, "PowerCurve"},
    {StudyId::Sensitivity1, "Sensitivity1"},
    {StudyId::Sensitivity2, "Sensitivity2"},
    {StudyId::Sensitivity3, "Sensitivity3"},
    {StudyId::FiveFunctionFixed, "FiveFunctionFixed"},
    {StudyId::TwoDimStudy1, "TwoDimStudy1"},
    {StudyId::TwoDimStudy2, "TwoDimStudy2"},
    {StudyId::TwoDimStudy1Modified, "TwoDimStudy1Modified"},
    {StudyId::BinomialK2, "BinomialK2"},
    {StudyId::BinomialK4Balanced, "BinomialK4Balanced"},
    {StudyId::BinomialK4Unbalanced, "BinomialK4Unbalanced"},
    {StudyId::FiveFunctionRandom1, "FiveFunctionRandom1"},
    {StudyId::FiveFunctionRandom2, "FiveFunctionRandom2"},
}};

inline std::string_view study_name(StudyId id)
{
    for (auto [s, name] : study_names) {
        if (s == id) return name;
    }
    fail(Errc::unknown_study, "unknown study id");
}

inline StudyId parse_study(std::string_view name)
{
    for (auto [s, n] : study_names) {
        if (n == name) return s;
    }
    fail(Errc::unknown_study, "unknown study '" + std::string(name) + "'");
}

inline bool is_quantile_study(StudyId id)
{
    return id == StudyId::LRQuantileFixed || id == StudyId::LRQuantileRandom;
}

struct StudyConfig {
    StudyId study = StudyId::Sensitivity1;
    /// Points per function; the grid side for two-dimensional studies; n_2
    /// for the random five-function designs.
    std::size_t n = 100;
    double alpha = 0.1;
    std::size_t replications = 200;
    std::uint64_t seed = 1;
};

using TrueFunction = std::function<double(const DesignPoint&)>;

struct Generated {
    std::vector<Dataset> datasets;
    std::vector<ModelFamily> families;
    std::vector<TrueFunction> truth;
};

namespace detail {

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<TrueFunction> five_functions()
{
    return {
        [](const DesignPoint& p) { return p[0]; },
        [](const DesignPoint& p) { return 0.9 * p[0] + 0.2 + 6.0 * (p[0] > 2.0); },
        [](const DesignPoint& p) { return 0.8 * p[0] + 4.0 * expit(2.0 * p[0] - 5.0); },
        [](const DesignPoint& p) { return 0.3 * p[0] * p[0] + p[0] - 0.2; },
        [](const DesignPoint& p) { return 4.0 * std::sqrt(p[0] + 1.0) + 1.0; },
    };
}

inline std::vector<TrueFunction> functions_for(StudyId id)
{
    auto sq = [](const DesignPoint& p) { return p[0] * p[0]; };
    auto split = [](const DesignPoint& p) { return p[0] <= 2.0 ? p[0] * p[0] : p[0] + 2.0; };
    auto plane = [](double a, double b, double c, double threshold) {
        return [=](const DesignPoint& p) {
            return a * p[0] + b * p[1] + c * (std::max(p[0], p[1]) > threshold);
        };
    };
    switch (id) {
    case StudyId::LRQuantileFixed:
    case StudyId::LRQuantileRandom:
        return {sq, sq};
    case StudyId::PowerCurve:
    case StudyId::Sensitivity1:
        return {sq, split};
    case StudyId::Sensitivity2:
        return {[](const DesignPoint&) { return 1.95; }, [](const DesignPoint& p) { return 1.0 + expit(p[0]); }};
    case StudyId::Sensitivity3:
        return {sq, [](const DesignPoint& p) { return std::pow(p[0], 4) - 1.0; }};
    case StudyId::FiveFunctionFixed:
    case StudyId::FiveFunctionRandom1:
    case StudyId::FiveFunctionRandom2:
        return five_functions();
    case StudyId::TwoDimStudy1:
        return {plane(0.5, 0.7, 1.5, 2.0), plane(0.6, 0.5, 1.4, 2.0)};
    case StudyId::TwoDimStudy1Modified:
        return {plane(0.5, 0.7, 1.5, 2.0), plane(0.6, 0.5, 1.4, 1.5)};
    case StudyId::TwoDimStudy2:
        return {[](const DesignPoint& p) {
                    const double r = (p[0] / 2) * (p[0] / 2) + (p[1] / 2) * (p[1] / 2);
                    return 0.4 + (r > 1.0 ? 3.0 * std::sqrt(r - 1.0) : 0.0);
                },
                [](const DesignPoint& p) {
                    const double r = (2 * p[0] / 5) * (2 * p[0] / 5) + (2 * p[1] / 5) * (2 * p[1] / 5);
                    return 0.3 + (r > 1.0 ? 0.3 + 4.0 * std::sqrt(r - 1.0) : 0.0);
                }};
    case StudyId::BinomialK2:
        return {[](const DesignPoint& p) { return 0.9 * std::sin(p[0] + 0.3) + 0.01; },
                [](const DesignPoint& p) { return std::sin(p[0] + 0.2); }};
    case StudyId::BinomialK4Balanced:
    case StudyId::BinomialK4Unbalanced:
        return {[](const DesignPoint& p) { return 0.05 + 0.73 * expit(10 * p[0] - 5); },
                [](const DesignPoint& p) { return 0.2 + 0.55 * expit(13 * p[0] - 4); },
                [](const DesignPoint& p) { return 0.2 + 0.7 * expit(11 * p[0] - 4); },
                [](const DesignPoint& p) { return 0.05 + 0.8 * expit(4 * p[0] - 4); }};
    }
    fail(Errc::unknown_study, "unknown study id");
}

} // namespace detail

/// Design points of function k for one replication.
inline std::vector<DesignPoint> design_for(const StudyConfig& c, std::size_t k, std::mt19937_64& rng)
{
    std::vector<DesignPoint> xs;
    const auto n = c.n;
    if (n == 0) fail(Errc::invalid_argument, "sample size must be positive");
    switch (c.study) {
    case StudyId::TwoDimStudy1:
    case StudyId::TwoDimStudy2:
    case StudyId::TwoDimStudy1Modified:
        for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t j = 1; j <= n; ++j) xs.push_back({4.0 * i / n, 4.0 * j / n});
        }
        return xs;
    case StudyId::BinomialK2:
    case StudyId::BinomialK4Balanced:
    case StudyId::BinomialK4Unbalanced:
        for (std::size_t i = 1; i <= n; ++i) xs.push_back({double(i) / n});
        return xs;
    case StudyId::LRQuantileRandom:
    case StudyId::FiveFunctionRandom1:
    case StudyId::FiveFunctionRandom2: {
        std::size_t nk = n;
        if (c.study == StudyId::FiveFunctionRandom2 && (k == 0 || k == 3 || k == 4)) nk = std::max<std::size_t>(1, n / 2);
        std::uniform_real_distribution<double> u(0.0, 4.0);
        for (std::size_t i = 0; i < nk; ++i) xs.push_back({u(rng)});
        return xs;
    }
    default:
        for (std::size_t i = 1; i <= n; ++i) xs.push_back({4.0 * i / n});
        return xs;
    }
}

inline bool is_binomial_study(StudyId id)
{
    return id == StudyId::BinomialK2 || id == StudyId::BinomialK4Balanced || id == StudyId::BinomialK4Unbalanced;
}

inline int trials_for(StudyId id, std::size_t k)
{
    switch (id) {
    case StudyId::BinomialK2:
        return 5;
    case StudyId::BinomialK4Unbalanced:
        return k == 1 ? 5 : 20;
    default:
        return 20;
    }
}

/// Data sets and true functions of replication `rep`. Gaussian studies use
/// unit noise variance, which is treated as known.
inline Generated generate(const StudyConfig& c, std::size_t rep)
{
    Generated g;
    g.truth = detail::functions_for(c.study);
    const auto sid = static_cast<std::uint64_t>(c.study);
    for (std::size_t k = 0; k < g.truth.size(); ++k) {
        auto design_rng = substream(c.seed, sid, rep, 2 * k);
        auto noise_rng = substream(c.seed, sid, rep, 2 * k + 1);
        Dataset d;
        d.function_id = k;
        const auto xs = design_for(c, k, design_rng);
        if (is_binomial_study(c.study)) {
            const int m = trials_for(c.study, k);
            for (const auto& x : xs) {
                const double p = std::clamp(g.truth[k](x), 0.0, 1.0);
                std::binomial_distribution<int> draw(m, p);
                d.rows.push_back({x, double(draw(noise_rng)), m});
            }
            g.families.push_back(ModelFamily::binomial());
        } else {
            std::normal_distribution<double> eps(0.0, 1.0);
            for (const auto& x : xs) d.rows.push_back({x, g.truth[k](x) + eps(noise_rng), std::nullopt});
            g.families.push_back(ModelFamily::gaussian(1.0));
        }
        g.datasets.push_back(std::move(d));
    }
    return g;
}

} // namespace isofuse::simlab
