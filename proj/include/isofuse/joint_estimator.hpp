#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "isofuse/borrowing.hpp"
#include "isofuse/error.hpp"
#include "isofuse/isotonic.hpp"
#include "isofuse/sample.hpp"

namespace isofuse {

/// Aligned data, fusion weights and each function's active node set: nodes it
/// observes plus nodes where some other function lends it a positive weight.
struct JointProblem {
    JointSample sample;
    WeightField weights;
    std::vector<std::vector<std::size_t>> active_sets;
    /// Order constraints of each function restricted to its active set.
    std::vector<OrderGraph> graphs;

    std::size_t K() const noexcept { return sample.K(); }
    std::size_t n() const noexcept { return sample.n(); }
};

inline std::vector<std::size_t> active_set(const JointSample& s, const WeightField& v, std::size_t k)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < s.n(); ++i) {
        bool on = s.functions[k].observes(i);
        for (std::size_t p = 0; p < s.K() && !on; ++p) on = p != k && v(k, p, i) > 0.0;
        if (on) out.push_back(i);
    }
    return out;
}

inline JointProblem make_joint_problem(JointSample sample, WeightField weights)
{
    if (weights.K() != sample.K() || (sample.K() > 1 && weights.n() != sample.n())) {
        fail(Errc::invalid_argument, "weight field does not match the sample");
    }
    JointProblem jp{std::move(sample), std::move(weights), {}, {}};
    for (std::size_t k = 0; k < jp.K(); ++k) {
        jp.active_sets.push_back(active_set(jp.sample, jp.weights, k));
        const auto& nodes = jp.active_sets.back();
        if (jp.sample.chain_rank) {
            // Chain order on the active set: sort by rank and link neighbours.
            auto sorted = nodes;
            const auto& rank = *jp.sample.chain_rank;
            std::sort(sorted.begin(), sorted.end(), [&](auto a, auto b) { return rank[a] < rank[b]; });
            std::vector<std::size_t> pos(jp.n());
            for (std::size_t r = 0; r < nodes.size(); ++r) pos[nodes[r]] = r;
            OrderGraph g(nodes.size());
            for (std::size_t r = 1; r < sorted.size(); ++r) g.add_edge(pos[sorted[r - 1]], pos[sorted[r]]);
            jp.graphs.push_back(std::move(g));
        } else {
            jp.graphs.push_back(jp.sample.poset.induced(nodes).graph());
        }
    }
    return jp;
}

/// Fitted values per function over the union design; NaN outside I_k.
using JointValues = std::vector<std::vector<double>>;

inline double joint_objective(const JointProblem& jp, const JointValues& values)
{
    if (values.size() != jp.K()) fail(Errc::incomplete_values, "one value vector per function is required");
    double obj = 0.0;
    for (std::size_t k = 0; k < jp.K(); ++k) {
        const auto& f = jp.sample.functions[k];
        if (values[k].size() != jp.n()) fail(Errc::incomplete_values, "value vector has the wrong length");
        for (auto i : jp.active_sets[k]) {
            const double yk = values[k][i];
            if (std::isnan(yk)) fail(Errc::incomplete_values, "missing value on an active node");
            const double r = f.targets[i] - yk;
            obj += f.fusion_scale * f.weights[i] * r * r;
            for (std::size_t p = k + 1; p < jp.K(); ++p) {
                const double v = jp.weights(k, p, i);
                if (v == 0.0) continue;
                const double d = yk - values[p][i];
                if (std::isnan(d)) fail(Errc::incomplete_values, "missing value on an active node");
                obj += v * d * d;
            }
        }
    }
    return obj;
}

/// Exact minimizer over function k's values with all other functions held
/// fixed: a weighted isotonic problem with pooled weights and pseudo-targets.
inline std::vector<double> block_update(const JointProblem& jp, std::size_t k, const JointValues& values)
{
    const auto& f = jp.sample.functions[k];
    const auto& nodes = jp.active_sets[k];
    std::vector<double> y(nodes.size()), w(nodes.size());
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        const auto i = nodes[r];
        double weight = f.fusion_scale * f.weights[i];
        double num = weight * f.targets[i];
        for (std::size_t p = 0; p < jp.K(); ++p) {
            if (p == k) continue;
            const double v = jp.weights(k, p, i);
            if (v == 0.0) continue;
            weight += v;
            num += v * values[p][i];
        }
        w[r] = weight;
        y[r] = num / weight;
    }
    IsotonicProblem prob{jp.graphs[k], std::move(y), std::move(w), {}};
    auto sol = solve(prob);
    std::vector<double> out(jp.n(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < nodes.size(); ++r) out[nodes[r]] = sol.values[r];
    return out;
}

struct FitOptions {
    double tol = 1e-8;
    std::size_t max_sweeps = 10000;
    bool reverse_order = false;
};

struct JointFit {
    JointValues values;
    /// Per function and node: active but unobserved, so the value is borrowed.
    std::vector<std::vector<char>> borrowed_only;
    std::size_t iterations = 0;
    std::vector<double> objective_trace;
    bool converged = false;
};

/// Separate fit of function k on its own data, extended to its active set.
inline std::vector<double> initial_values(const JointProblem& jp, std::size_t k)
{
    const auto& f = jp.sample.functions[k];
    const auto& nodes = jp.active_sets[k];
    std::vector<double> y, w;
    for (auto i : nodes) {
        y.push_back(f.targets[i]);
        w.push_back(f.weights[i]);
    }
    IsotonicProblem prob{jp.graphs[k], std::move(y), std::move(w), {}};
    auto sol = solve(prob);
    std::vector<double> out(jp.n(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < nodes.size(); ++r) out[nodes[r]] = sol.values[r];
    return out;
}

inline JointFit fit_joint(const JointProblem& jp, const FitOptions& opt = {})
{
    if (!(opt.tol > 0.0) || opt.max_sweeps < 1) fail(Errc::invalid_argument, "tol must be positive and max_sweeps >= 1");
    const auto K = jp.K();
    JointFit fit;
    fit.values.resize(K);
    for (std::size_t k = 0; k < K; ++k) fit.values[k] = initial_values(jp, k);
    // A borrowed-only node with nothing observed above or below it has no
    // separate-fit value; start it from the mean of its lenders' values.
    for (std::size_t k = 0; k < K; ++k) {
        for (auto i : jp.active_sets[k]) {
            if (!std::isnan(fit.values[k][i])) continue;
            double num = 0.0, den = 0.0;
            for (std::size_t p = 0; p < K; ++p) {
                const double v = p == k ? 0.0 : jp.weights(k, p, i);
                if (v > 0.0 && !std::isnan(fit.values[p][i])) {
                    num += v * fit.values[p][i];
                    den += v;
                }
            }
            fit.values[k][i] = den > 0.0 ? num / den : 0.0;
        }
    }

    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (opt.reverse_order) std::reverse(order.begin(), order.end());

    double obj = joint_objective(jp, fit.values);
    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        double change = 0.0;
        for (auto k : order) {
            auto next = block_update(jp, k, fit.values);
            for (auto i : jp.active_sets[k]) change = std::max(change, std::abs(next[i] - fit.values[k][i]));
            fit.values[k] = std::move(next);
            const double after = joint_objective(jp, fit.values);
            if (after > obj + 1e-9 * std::max(1.0, std::abs(obj))) {
                fail(Errc::descent_violation, "block update increased the joint objective");
            }
            obj = after;
        }
        fit.objective_trace.push_back(obj);
        fit.iterations = sweep + 1;
        if (change < opt.tol) {
            fit.converged = true;
            break;
        }
    }

    fit.borrowed_only.assign(K, std::vector<char>(jp.n(), 0));
    for (std::size_t k = 0; k < K; ++k) {
        for (auto i : jp.active_sets[k]) fit.borrowed_only[k][i] = !jp.sample.functions[k].observes(i);
    }
    return fit;
}

/// Step-function prediction for function k: max fitted value over active
/// design points below z.
inline double predict(const JointFit& fit, const DesignPoset& poset, std::size_t k, const DesignPoint& z)
{
    if (k >= fit.values.size()) fail(Errc::invalid_argument, "function index out of range");
    IsotonicSolution sol;
    sol.values = fit.values[k];
    return interpolate(sol, poset, z);
}

} // namespace isofuse
