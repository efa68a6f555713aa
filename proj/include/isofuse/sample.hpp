#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <vector>

#include "isofuse/design_poset.hpp"
#include "isofuse/error.hpp"
#include "isofuse/likelihood.hpp"

namespace isofuse {

/// Sufficient statistics of one function's rows at one design point.
struct NodeStats {
    double count = 0.0;
    double sum = 0.0;     // responses (Gaussian) or successes (binomial)
    double sum_sq = 0.0;  // Gaussian only
    double trials = 0.0;  // binomial only
    double log_const = 0.0;
};

/// One function's data pooled onto the union design. Duplicate rows at a
/// point collapse to their weighted mean with summed weight.
struct FunctionSample {
    ModelFamily family;
    std::vector<NodeStats> nodes;
    std::vector<double> targets;
    std::vector<double> weights;
    std::vector<std::size_t> observed;
    /// Multiplies `weights` in the joint objective. Binomial weights are trial
    /// counts; rescaling them to one per row keeps the data term on the same
    /// footing as the unit fusion weights.
    double fusion_scale = 1.0;

    bool observes(std::size_t i) const { return weights[i] > 0.0; }
    std::size_t rows() const
    {
        double c = 0.0;
        for (const auto& s : nodes) c += s.count;
        return static_cast<std::size_t>(c);
    }
};

/// K datasets aligned to the poset of all distinct design points.
struct JointSample {
    DesignPoset poset;
    std::vector<FunctionSample> functions;
    /// Position of each node along the chain when the design is totally ordered.
    std::optional<std::vector<std::size_t>> chain_rank;

    std::size_t K() const noexcept { return functions.size(); }
    std::size_t n() const noexcept { return poset.size(); }
};

/// Gaussian families without a variance get one estimated from their own
/// separate isotonic fit; the value is then fixed for every later step.
inline ModelFamily resolve_family(const Dataset& data, const ModelFamily& family)
{
    validate_dataset(data, family);
    if (family.kind == FamilyKind::gaussian && !family.sigma2) return ModelFamily::gaussian(estimate_sigma2(data));
    return family;
}

inline JointSample align(const std::vector<Dataset>& datasets, const std::vector<ModelFamily>& families)
{
    if (datasets.empty()) fail(Errc::invalid_argument, "at least one dataset is required");
    if (families.size() != datasets.size()) fail(Errc::invalid_argument, "one model family per dataset");

    std::set<DesignPoint> distinct;
    for (const auto& d : datasets) {
        validate_dataset(d, families[&d - datasets.data()]);
        for (const auto& r : d.rows) distinct.insert(r.x);
    }
    JointSample s;
    s.poset = build_poset(std::vector<DesignPoint>(distinct.begin(), distinct.end()));
    const auto n = s.poset.size();
    if (auto order = s.poset.graph().chain_order()) {
        std::vector<std::size_t> rank(n);
        for (std::size_t r = 0; r < n; ++r) rank[(*order)[r]] = r;
        s.chain_rank = std::move(rank);
    }

    for (std::size_t k = 0; k < datasets.size(); ++k) {
        const auto& data = datasets[k];
        FunctionSample f;
        f.family = resolve_family(data, families[k]);
        f.nodes.assign(n, NodeStats{});
        for (const auto& r : data.rows) {
            auto& st = f.nodes[*s.poset.find(r.x)];
            st.count += 1.0;
            st.sum += r.response;
            if (f.family.is_binomial()) {
                st.trials += *r.trials;
                st.log_const += detail::log_choose(*r.trials, r.response);
            } else {
                st.sum_sq += r.response * r.response;
            }
        }
        f.targets.assign(n, 0.0);
        f.weights.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& st = f.nodes[i];
            if (st.count == 0.0) continue;
            if (f.family.is_binomial()) {
                f.targets[i] = st.sum / st.trials;
                f.weights[i] = st.trials;
            } else {
                f.targets[i] = st.sum / st.count;
                f.weights[i] = st.count / *f.family.sigma2;
            }
            f.observed.push_back(i);
        }
        if (f.family.is_binomial()) {
            double trials = 0.0;
            for (const auto& st : f.nodes) trials += st.trials;
            if (trials > 0.0) f.fusion_scale = static_cast<double>(data.rows.size()) / trials;
        }
        s.functions.push_back(std::move(f));
    }
    return s;
}

/// -2 × (log-likelihood at `null_fit` minus log-likelihood at `alt_fit`) for
/// the rows pooled in one node. Computed as a difference so that constants
/// cancel exactly.
inline double node_deviance_gap(const NodeStats& st, const ModelFamily& family, double null_fit, double alt_fit)
{
    if (st.count == 0.0) return 0.0;
    if (family.is_binomial()) {
        const double succ = st.sum, fail_count = st.trials - st.sum;
        auto term = [](double y, double p0, double p1) {
            if (y == 0.0) return 0.0;
            if (p0 <= 0.0 || p1 <= 0.0) fail(Errc::degenerate_likelihood, "zero probability for observed outcome");
            return y * std::log(p0 / p1);
        };
        return -2.0 * (term(succ, null_fit, alt_fit) + term(fail_count, 1.0 - null_fit, 1.0 - alt_fit));
    }
    const double mean = st.sum / st.count;
    return st.count * (null_fit - alt_fit) * (null_fit + alt_fit - 2.0 * mean) / *family.sigma2;
}

} // namespace isofuse
