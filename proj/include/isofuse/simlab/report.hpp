#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include <json.hpp>

#include "isofuse/io/format.hpp"
#include "isofuse/simlab/runners.hpp"

namespace isofuse::simlab {

using Json = nlohmann::ordered_json;

inline Json config_json(const StudyConfig& c)
{
    return Json{{"study", study_name(c.study)},
                {"n", c.n},
                {"alpha", c.alpha},
                {"replications", c.replications},
                {"seed", c.seed}};
}

inline Json summary_json(const RatioSummary& s)
{
    return Json{{"R_median", s.median}, {"R_q1", s.q1}, {"R_q3", s.q3}, {"P", s.p}};
}

inline Json to_json(const RatioStudyReport& r)
{
    Json j{{"schema", "isofuse-v1"}, {"kind", "ratio_study"}, {"config", config_json(r.config)}};
    Json per = Json::array();
    for (std::size_t k = 0; k < r.per_function.size(); ++k) {
        auto s = summary_json(r.per_function[k]);
        s["function"] = k + 1;
        per.push_back(std::move(s));
    }
    j["functions"] = std::move(per);
    j["overall"] = summary_json(r.overall);

    std::size_t nonconverged = 0;
    double max_increase = 0.0, max_gap = 0.0;
    bool verified = false;
    Json reps = Json::array();
    for (const auto& rep : r.replications) {
        nonconverged += !rep.converged;
        max_increase = std::max(max_increase, rep.max_trace_increase);
        if (!std::isnan(rep.reverse_gap)) {
            verified = true;
            max_gap = std::max(max_gap, rep.reverse_gap);
        }
        reps.push_back(Json{{"R", rep.overall_joint / rep.overall_separate},
                            {"rmse_joint", rep.overall_joint},
                            {"rmse_separate", rep.overall_separate},
                            {"sweeps", rep.sweeps}});
    }
    j["diagnostics"] = Json{{"nonconverged", nonconverged},
                            {"max_trace_increase", max_increase},
                            {"max_reverse_gap", verified ? Json(max_gap) : Json(nullptr)}};
    j["replications"] = std::move(reps);
    return j;
}

inline Json to_json(const QuantileStudyReport& r)
{
    Json j{{"schema", "isofuse-v1"}, {"kind", "lr_quantiles"}, {"config", config_json(r.config)}};
    j["probabilities"] = quantile_probs;
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json q = Json::array();
        for (double v : row.q) q.push_back(std::isnan(v) ? Json(nullptr) : Json(v));
        rows.push_back(Json{{"point", row.point}, {"conditioned_on_positive", row.conditioned}, {"count", row.count},
                            {"quantiles", std::move(q)}});
    }
    j["rows"] = std::move(rows);
    return j;
}

inline Json to_json(const PowerStudyReport& r)
{
    Json j{{"schema", "isofuse-v1"}, {"kind", "power_curve"}, {"config", config_json(r.config)}};
    j["critical_value"] = r.critical_value;
    j["mean_rejection_x_le_2"] = r.mean_rejection_identical;
    j["min_rejection_x_gt_2_5"] = std::isnan(r.min_rejection_far) ? Json(nullptr) : Json(r.min_rejection_far);
    Json curve = Json::array();
    for (const auto& p : r.curve) curve.push_back(Json{{"x", p.x}, {"rejection", p.rejection}});
    j["curve"] = std::move(curve);
    return j;
}

inline std::string to_csv(const RatioStudyReport& r)
{
    std::ostringstream out;
    out << "study,n,alpha,replications,function,R_median,R_q1,R_q3,P\n";
    auto line = [&](const std::string& f, const RatioSummary& s) {
        out << study_name(r.config.study) << ',' << r.config.n << ',' << io::fmt(r.config.alpha) << ','
            << r.config.replications << ',' << f << ',' << io::fmt(s.median) << ',' << io::fmt(s.q1) << ','
            << io::fmt(s.q3) << ',' << io::fmt(s.p) << '\n';
    };
    for (std::size_t k = 0; k < r.per_function.size(); ++k) line(std::to_string(k + 1), r.per_function[k]);
    line("overall", r.overall);
    return out.str();
}

inline std::string to_csv(const QuantileStudyReport& r)
{
    std::ostringstream out;
    out << "study,n,replications,point,conditioned_on_positive,count,q0.5,q0.7,q0.8,q0.9,q0.95\n";
    for (const auto& row : r.rows) {
        out << study_name(r.config.study) << ',' << r.config.n << ',' << r.config.replications << ',' << row.point
            << ',' << (row.conditioned ? "true" : "false") << ',' << row.count;
        for (double v : row.q) out << ',' << io::fmt(v);
        out << '\n';
    }
    return out.str();
}

inline std::string to_csv(const PowerStudyReport& r)
{
    std::ostringstream out;
    out << "study,n,alpha,replications,x,rejection\n";
    for (const auto& p : r.curve) {
        out << study_name(r.config.study) << ',' << r.config.n << ',' << io::fmt(r.config.alpha) << ','
            << r.config.replications << ',' << io::fmt(p.x) << ',' << io::fmt(p.rejection) << '\n';
    }
    return out.str();
}

struct StudyOutput {
    Json json;
    std::string csv;
};

/// Runs whichever runner matches the study.
inline StudyOutput run_study(const StudyConfig& c, const RunOptions& opt = {})
{
    if (is_quantile_study(c.study)) {
        auto r = lr_quantile_study(c, opt);
        return {to_json(r), to_csv(r)};
    }
    if (c.study == StudyId::PowerCurve) {
        auto r = power_study(c, opt);
        return {to_json(r), to_csv(r)};
    }
    auto r = run_ratio_study(c, opt);
    return {to_json(r), to_csv(r)};
}

/// Replication counts: full runs by default, a reduced set for quick runs.
inline std::size_t default_replications(StudyId id, bool fast)
{
    if (is_quantile_study(id)) return fast ? 2000 : 20000;
    if (id == StudyId::PowerCurve) return fast ? 200 : 1000;
    return fast ? 50 : 200;
}

} // namespace isofuse::simlab
