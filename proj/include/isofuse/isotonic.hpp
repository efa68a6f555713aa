#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isofuse/design_poset.hpp"
#include "isofuse/error.hpp"
#include "isofuse/max_flow.hpp"

namespace isofuse {

/// Weighted least-squares isotonic regression over a constraint DAG.
///
/// `merges` lists node sets that must share a single fitted value (the tied
/// node of the similarity test). Nodes with zero weight carry constraints only.
struct IsotonicProblem {
    OrderGraph graph;
    std::vector<double> targets;
    std::vector<double> weights;
    std::vector<std::vector<std::size_t>> merges;

    std::size_t size() const noexcept { return targets.size(); }

    static IsotonicProblem on(const DesignPoset& poset, std::vector<double> targets, std::vector<double> weights)
    {
        return IsotonicProblem{poset.graph(), std::move(targets), std::move(weights), {}};
    }
};

struct IsotonicSolution {
    /// Fitted value per node; NaN where the node has no defined value.
    std::vector<double> values;
    double objective = 0.0;
    /// Active nodes grouped by identical fitted value, in ascending value order.
    std::vector<std::vector<std::size_t>> level_sets;

    bool active(std::size_t i) const { return !std::isnan(values[i]); }
    std::size_t distinct_levels() const noexcept { return level_sets.size(); }
};

namespace detail {

struct PoolBlock {
    double weight;
    double sum;
    std::size_t count;
    double mean() const { return sum / weight; }
};

/// Pool-adjacent-violators on a sequence; all weights must be positive.
inline std::vector<PoolBlock> pool_adjacent_violators(std::span<const double> y, std::span<const double> w)
{
    std::vector<PoolBlock> blocks;
    blocks.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        PoolBlock b{w[i], w[i] * y[i], 1};
        while (!blocks.empty() && blocks.back().sum * b.weight >= b.sum * blocks.back().weight) {
            const auto& top = blocks.back();
            b.weight += top.weight;
            b.sum += top.sum;
            b.count += top.count;
            blocks.pop_back();
        }
        blocks.push_back(b);
    }
    return blocks;
}

inline std::vector<double> expand_blocks(const std::vector<PoolBlock>& blocks, std::size_t n)
{
    std::vector<double> out;
    out.reserve(n);
    for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean());
    return out;
}

inline double weighted_sse(std::span<const double> y, std::span<const double> w, std::span<const double> fit)
{
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (w[i] > 0.0 && !std::isnan(fit[i])) s += w[i] * (y[i] - fit[i]) * (y[i] - fit[i]);
    }
    return s;
}

inline std::vector<std::vector<std::size_t>> group_level_sets(const std::vector<double>& values)
{
    std::map<double, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isnan(values[i])) groups[values[i]].push_back(i);
    }
    std::vector<std::vector<std::size_t>> out;
    out.reserve(groups.size());
    for (auto& [v, members] : groups) out.push_back(std::move(members));
    return out;
}

inline void validate(const IsotonicProblem& p)
{
    const auto n = p.size();
    if (p.weights.size() != n || p.graph.size() != n) {
        fail(Errc::invalid_argument, "targets, weights and graph disagree on node count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(p.weights[i]) || p.weights[i] < 0.0) {
            fail(Errc::invalid_argument, "weights must be finite and nonnegative");
        }
        if (p.weights[i] > 0.0 && !std::isfinite(p.targets[i])) {
            fail(Errc::invalid_argument, "target must be finite where weight is positive");
        }
    }
    std::vector<char> used(n, 0);
    for (const auto& m : p.merges) {
        if (m.empty()) fail(Errc::invalid_argument, "empty merge set");
        for (auto i : m) {
            if (i >= n) fail(Errc::invalid_argument, "merge index out of range");
            if (used[i]) fail(Errc::invalid_argument, "merge sets overlap");
            used[i] = 1;
        }
    }
}

// Strongly connected components (iterative Kosaraju); returns component id per node.
inline std::vector<std::size_t> strong_components(std::size_t n,
                                                  const std::vector<std::vector<std::size_t>>& succ,
                                                  std::size_t& n_comp)
{
    std::vector<std::vector<std::size_t>> pred(n);
    for (std::size_t u = 0; u < n; ++u) {
        for (auto v : succ[u]) pred[v].push_back(u);
    }
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> finish;
    finish.reserve(n);
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        seen[s] = 1;
        stack.emplace_back(s, 0);
        while (!stack.empty()) {
            auto& [u, i] = stack.back();
            if (i < succ[u].size()) {
                auto v = succ[u][i++];
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.emplace_back(v, 0);
                }
            } else {
                finish.push_back(u);
                stack.pop_back();
            }
        }
    }
    constexpr auto none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> comp(n, none);
    n_comp = 0;
    std::vector<std::size_t> work;
    for (auto it = finish.rbegin(); it != finish.rend(); ++it) {
        if (comp[*it] != none) continue;
        comp[*it] = n_comp;
        work.push_back(*it);
        while (!work.empty()) {
            auto u = work.back();
            work.pop_back();
            for (auto v : pred[u]) {
                if (comp[v] == none) {
                    comp[v] = n_comp;
                    work.push_back(v);
                }
            }
        }
        ++n_comp;
    }
    return comp;
}

} // namespace detail

/// Exact weighted isotonic regression on a chain (pool adjacent violators).
inline IsotonicSolution solve_chain(const IsotonicProblem& problem)
{
    detail::validate(problem);
    if (!problem.merges.empty()) fail(Errc::not_a_chain, "merged nodes are not a chain problem");
    auto order = problem.graph.chain_order();
    if (!order) fail(Errc::not_a_chain, "constraint graph is not a total order");
    const auto n = problem.size();
    std::vector<double> y(n), w(n);
    for (std::size_t r = 0; r < n; ++r) {
        y[r] = problem.targets[(*order)[r]];
        w[r] = problem.weights[(*order)[r]];
        if (!(w[r] > 0.0)) fail(Errc::invalid_argument, "chain solver requires positive weights");
    }
    auto fitted = detail::expand_blocks(detail::pool_adjacent_violators(y, w), n);

    IsotonicSolution sol;
    sol.values.resize(n);
    for (std::size_t r = 0; r < n; ++r) sol.values[(*order)[r]] = fitted[r];
    sol.objective = detail::weighted_sse(problem.targets, problem.weights, sol.values);
    sol.level_sets = detail::group_level_sets(sol.values);
    return sol;
}

/// Exact weighted isotonic regression on an arbitrary DAG with merged nodes.
///
/// Merge sets and any constraint cycles they induce are contracted first. The
/// contracted problem is solved by recursive partitioning: each block is split
/// at its weighted mean by a maximum-weight upper-set computed as a minimum
/// cut. Zero-weight nodes take the largest fitted value below them, or failing
/// that the smallest value above them; nodes with neither stay undefined (NaN).
inline IsotonicSolution solve_partial_order(const IsotonicProblem& problem)
{
    detail::validate(problem);
    const auto n = problem.size();

    // Union-find over merge sets.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& m : problem.merges) {
        for (std::size_t j = 1; j < m.size(); ++j) parent[find(m[j])] = find(m[0]);
    }
    std::vector<std::size_t> rep_id(n, n), node_of(n);
    std::size_t n_rep = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = find(i);
        if (rep_id[r] == n) rep_id[r] = n_rep++;
        node_of[i] = rep_id[r];
    }
    std::vector<std::vector<std::size_t>> rep_succ(n_rep);
    for (std::size_t u = 0; u < n; ++u) {
        for (auto v : problem.graph.successors(u)) {
            if (node_of[u] != node_of[v]) rep_succ[node_of[u]].push_back(node_of[v]);
        }
    }
    // Equalities can close order cycles; every node on a cycle shares one value.
    std::size_t n_super = 0;
    auto comp = detail::strong_components(n_rep, rep_succ, n_super);
    for (auto& c : node_of) c = comp[c];

    std::vector<double> weight(n_super, 0.0), wsum(n_super, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (problem.weights[i] > 0.0) {
            weight[node_of[i]] += problem.weights[i];
            wsum[node_of[i]] += problem.weights[i] * problem.targets[i];
        }
    }
    OrderGraph g(n_super);
    {
        std::vector<std::pair<std::size_t, std::size_t>> es;
        for (std::size_t u = 0; u < n; ++u) {
            for (auto v : problem.graph.successors(u)) {
                auto a = node_of[u], b = node_of[v];
                if (a != b) es.emplace_back(a, b);
            }
        }
        std::sort(es.begin(), es.end());
        es.erase(std::unique(es.begin(), es.end()), es.end());
        for (auto [a, b] : es) g.add_edge(a, b);
    }
    auto topo = g.topological_order();
    if (!topo) fail(Errc::infeasible, "contracted constraint graph is cyclic");

    // Recursive partitioning over every supernode; zero weights add no capacity.
    std::vector<double> value(n_super, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::vector<std::size_t>> pending;
    {
        std::vector<std::size_t> all(n_super);
        std::iota(all.begin(), all.end(), std::size_t{0});
        pending.push_back(std::move(all));
    }
    std::vector<std::ptrdiff_t> local(n_super, -1);
    while (!pending.empty()) {
        auto block = std::move(pending.back());
        pending.pop_back();
        double W = 0.0, S = 0.0;
        for (auto u : block) {
            W += weight[u];
            S += wsum[u];
        }
        if (!(W > 0.0)) continue;
        const double mean = S / W;
        std::vector<double> d(block.size());
        double scale = 0.0;
        for (std::size_t r = 0; r < block.size(); ++r) {
            auto u = block[r];
            d[r] = weight[u] > 0.0 ? wsum[u] - weight[u] * mean : 0.0;
            scale += std::abs(d[r]);
        }
        auto settle = [&] {
            for (auto u : block) value[u] = mean;
        };
        if (block.size() == 1 || scale == 0.0) {
            settle();
            continue;
        }
        for (std::size_t r = 0; r < block.size(); ++r) local[block[r]] = static_cast<std::ptrdiff_t>(r);
        const std::size_t src = block.size(), snk = block.size() + 1;
        detail::MaxFlow flow(block.size() + 2, 1e-15 * scale);
        for (std::size_t r = 0; r < block.size(); ++r) {
            if (d[r] > 0.0) flow.add_edge(src, r, d[r]);
            else if (d[r] < 0.0) flow.add_edge(r, snk, -d[r]);
            for (auto v : g.successors(block[r])) {
                if (local[v] >= 0) flow.add_edge(r, static_cast<std::size_t>(local[v]), detail::MaxFlow::infinity);
            }
        }
        flow.run(src, snk);
        auto side = flow.source_side(src);
        for (auto u : block) local[u] = -1;

        std::vector<std::size_t> upper, lower;
        double gain = 0.0;
        for (std::size_t r = 0; r < block.size(); ++r) {
            if (side[r]) {
                upper.push_back(block[r]);
                gain += d[r];
            } else {
                lower.push_back(block[r]);
            }
        }
        if (upper.empty() || lower.empty() || !(gain > 1e-12 * scale)) {
            settle();
            continue;
        }
        pending.push_back(std::move(lower));
        pending.push_back(std::move(upper));
    }

    // Zero-weight supernodes: largest value below, else smallest value above.
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    constexpr double pos_inf = std::numeric_limits<double>::infinity();
    std::vector<double> below(n_super, neg_inf);
    for (auto u : *topo) {
        if (weight[u] > 0.0) below[u] = std::max(below[u], value[u]);
        else value[u] = below[u] > neg_inf ? below[u] : std::numeric_limits<double>::quiet_NaN();
        for (auto v : g.successors(u)) below[v] = std::max(below[v], below[u]);
    }
    std::vector<double> above(n_super, pos_inf);
    for (auto it = topo->rbegin(); it != topo->rend(); ++it) {
        auto u = *it;
        for (auto v : g.successors(u)) above[u] = std::min(above[u], above[v]);
        if (weight[u] == 0.0 && std::isnan(value[u]) && above[u] < pos_inf) value[u] = above[u];
        if (!std::isnan(value[u])) above[u] = std::min(above[u], value[u]);
    }

    IsotonicSolution sol;
    sol.values.resize(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        sol.values[i] = value[node_of[i]];
        any = any || !std::isnan(sol.values[i]);
    }
    if (!any) fail(Errc::no_active_nodes, "no node carries positive weight");
    sol.objective = detail::weighted_sse(problem.targets, problem.weights, sol.values);
    sol.level_sets = detail::group_level_sets(sol.values);
    return sol;
}

/// Chain problems with positive weights go through pool-adjacent-violators,
/// everything else through the partitioning solver.
inline IsotonicSolution solve(const IsotonicProblem& problem)
{
    if (problem.merges.empty() &&
        std::all_of(problem.weights.begin(), problem.weights.end(), [](double w) { return w > 0.0; }) &&
        problem.graph.chain_order()) {
        return solve_chain(problem);
    }
    return solve_partial_order(problem);
}

/// Two chains whose nodes at `tie_a` / `tie_b` are forced to a common value.
struct TiedChainsSolution {
    std::vector<double> first;
    std::vector<double> second;
    double tied_value = 0.0;
};

/// Exact solver for two chains tied at one node each.
///
/// For a fixed tied value c, each side of each chain is a bounded chain problem
/// whose solution clips the unbounded fit at c. The objective is then convex in
/// c and its derivative is piecewise linear in the pooled blocks, so the
/// optimal c is found by a scan over block means. Only the tie nodes may have
/// zero weight, and their combined weight must be positive.
inline TiedChainsSolution solve_tied_chains(std::span<const double> y_a, std::span<const double> w_a,
                                            std::size_t tie_a, std::span<const double> y_b,
                                            std::span<const double> w_b, std::size_t tie_b)
{
    if (y_a.size() != w_a.size() || y_b.size() != w_b.size() || tie_a >= y_a.size() || tie_b >= y_b.size()) {
        fail(Errc::invalid_argument, "tied chains: inconsistent sizes");
    }
    const double w_tie = w_a[tie_a] + w_b[tie_b];
    if (!(w_tie > 0.0) || w_a[tie_a] < 0.0 || w_b[tie_b] < 0.0) {
        fail(Errc::invalid_argument, "tied chains: tied node needs positive combined weight");
    }
    const double s_tie = (w_a[tie_a] > 0.0 ? w_a[tie_a] * y_a[tie_a] : 0.0) +
                         (w_b[tie_b] > 0.0 ? w_b[tie_b] * y_b[tie_b] : 0.0);

    auto pool = [](std::span<const double> y, std::span<const double> w) {
        for (double x : w) {
            if (!(x > 0.0)) fail(Errc::invalid_argument, "tied chains: non-tie weights must be positive");
        }
        return detail::pool_adjacent_violators(y, w);
    };
    auto la = pool(y_a.first(tie_a), w_a.first(tie_a));
    auto ra = pool(y_a.subspan(tie_a + 1), w_a.subspan(tie_a + 1));
    auto lb = pool(y_b.first(tie_b), w_b.first(tie_b));
    auto rb = pool(y_b.subspan(tie_b + 1), w_b.subspan(tie_b + 1));

    // Left blocks bind when their mean exceeds c, right blocks when below c.
    struct Item {
        double mean, weight, sum;
    };
    std::vector<Item> left, right;
    for (const auto* v : {&la, &lb}) {
        for (const auto& b : *v) left.push_back({b.mean(), b.weight, b.sum});
    }
    for (const auto* v : {&ra, &rb}) {
        for (const auto& b : *v) right.push_back({b.mean(), b.weight, b.sum});
    }
    auto by_mean = [](const Item& a, const Item& b) { return a.mean < b.mean; };
    std::sort(left.begin(), left.end(), by_mean);
    std::sort(right.begin(), right.end(), by_mean);
    // Prefix sums: left suffixes and right prefixes are the binding sets.
    std::vector<double> lw(left.size() + 1, 0.0), ls(left.size() + 1, 0.0);
    for (std::size_t i = left.size(); i-- > 0;) {
        lw[i] = lw[i + 1] + left[i].weight;
        ls[i] = ls[i + 1] + left[i].sum;
    }
    std::vector<double> rw(right.size() + 1, 0.0), rs(right.size() + 1, 0.0);
    for (std::size_t i = 0; i < right.size(); ++i) {
        rw[i + 1] = rw[i] + right[i].weight;
        rs[i + 1] = rs[i] + right[i].sum;
    }
    // Binding sets for c in an open interval: left means > c, right means < c.
    auto binding = [&](double c) {
        auto li = static_cast<std::size_t>(
            std::upper_bound(left.begin(), left.end(), c, [](double x, const Item& it) { return x < it.mean; }) -
            left.begin());
        auto ri = static_cast<std::size_t>(
            std::lower_bound(right.begin(), right.end(), c, [](const Item& it, double x) { return it.mean < x; }) -
            right.begin());
        return std::pair{li, ri};
    };
    auto slope_at = [&](double c) {
        auto [li, ri] = binding(c);
        return (w_tie + lw[li] + rw[ri]) * c - (s_tie + ls[li] + rs[ri]);
    };

    std::vector<double> breaks;
    breaks.reserve(left.size() + right.size());
    for (const auto& it : left) breaks.push_back(it.mean);
    for (const auto& it : right) breaks.push_back(it.mean);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    // First breakpoint where the derivative is nonnegative brackets the root.
    auto hi_it = std::partition_point(breaks.begin(), breaks.end(), [&](double b) { return slope_at(b) < 0.0; });
    double lo = hi_it == breaks.begin() ? -std::numeric_limits<double>::infinity() : *(hi_it - 1);
    double hi = hi_it == breaks.end() ? std::numeric_limits<double>::infinity() : *hi_it;
    double probe;
    if (std::isinf(lo) && std::isinf(hi)) probe = 0.0;
    else if (std::isinf(lo)) probe = hi - 1.0;
    else if (std::isinf(hi)) probe = lo + 1.0;
    else probe = 0.5 * (lo + hi);
    auto [li, ri] = binding(probe);
    double c = (s_tie + ls[li] + rs[ri]) / (w_tie + lw[li] + rw[ri]);
    c = std::clamp(c, lo, hi);

    auto assemble = [&](const std::vector<detail::PoolBlock>& l, const std::vector<detail::PoolBlock>& r,
                        std::size_t size) {
        std::vector<double> out;
        out.reserve(size);
        for (const auto& b : l) out.insert(out.end(), b.count, std::min(b.mean(), c));
        out.push_back(c);
        for (const auto& b : r) out.insert(out.end(), b.count, std::max(b.mean(), c));
        return out;
    };
    TiedChainsSolution sol;
    sol.first = assemble(la, ra, y_a.size());
    sol.second = assemble(lb, rb, y_b.size());
    sol.tied_value = c;
    return sol;
}

/// Step interpolant: largest fitted value among active design points below z.
inline double interpolate(const IsotonicSolution& solution, const DesignPoset& poset, const DesignPoint& z)
{
    if (z.dim() != poset.dim()) fail(Errc::dimension_mismatch, "query point dimension differs from design");
    double best = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < poset.size(); ++i) {
        if (solution.active(i) && precedes(poset.point(i), z)) {
            best = std::max(best, solution.values[i]);
            found = true;
        }
    }
    if (!found) fail(Errc::below_observed_range, "no fitted design point lies below the query point");
    return best;
}

} // namespace isofuse
