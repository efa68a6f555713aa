#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isofuse/error.hpp"

namespace isofuse {

/// A location in covariate space. Ordering between points is componentwise.
struct DesignPoint {
    std::vector<double> coords;

    DesignPoint() = default;
    explicit DesignPoint(std::vector<double> c) : coords(std::move(c)) {}
    DesignPoint(std::initializer_list<double> c) : coords(c) {}

    std::size_t dim() const noexcept { return coords.size(); }
    double operator[](std::size_t i) const { return coords[i]; }

    friend bool operator==(const DesignPoint&, const DesignPoint&) = default;
    friend auto operator<=>(const DesignPoint& a, const DesignPoint& b) { return a.coords <=> b.coords; }
};

/// a ≼ b: every coordinate of a is at most the matching coordinate of b.
inline bool precedes(const DesignPoint& a, const DesignPoint& b) noexcept
{
    for (std::size_t d = 0; d < a.coords.size(); ++d) {
        if (a.coords[d] > b.coords[d]) return false;
    }
    return true;
}

/// A DAG over node indices 0..n-1; an edge (u, v) means value_u <= value_v.
class OrderGraph {
public:
    OrderGraph() = default;
    explicit OrderGraph(std::size_t n) : succ_(n), pred_(n) {}

    std::size_t size() const noexcept { return succ_.size(); }
    std::size_t edge_count() const noexcept { return n_edges_; }

    void add_edge(std::size_t from, std::size_t to)
    {
        succ_[from].push_back(to);
        pred_[to].push_back(from);
        ++n_edges_;
    }

    const std::vector<std::size_t>& successors(std::size_t i) const { return succ_[i]; }
    const std::vector<std::size_t>& predecessors(std::size_t i) const { return pred_[i]; }

    std::vector<std::pair<std::size_t, std::size_t>> edges() const
    {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        out.reserve(n_edges_);
        for (std::size_t u = 0; u < succ_.size(); ++u) {
            for (auto v : succ_[u]) out.emplace_back(u, v);
        }
        return out;
    }

    /// Kahn ordering (smallest ready index first); empty optional if the graph has a cycle.
    std::optional<std::vector<std::size_t>> topological_order() const
    {
        const auto n = size();
        std::vector<std::size_t> indeg(n);
        for (std::size_t v = 0; v < n; ++v) indeg[v] = pred_[v].size();
        std::vector<std::size_t> ready;
        for (std::size_t v = 0; v < n; ++v) {
            if (indeg[v] == 0) ready.push_back(v);
        }
        std::make_heap(ready.begin(), ready.end(), std::greater<>{});
        std::vector<std::size_t> order;
        order.reserve(n);
        while (!ready.empty()) {
            std::pop_heap(ready.begin(), ready.end(), std::greater<>{});
            auto u = ready.back();
            ready.pop_back();
            order.push_back(u);
            for (auto v : succ_[u]) {
                if (--indeg[v] == 0) {
                    ready.push_back(v);
                    std::push_heap(ready.begin(), ready.end(), std::greater<>{});
                }
            }
        }
        if (order.size() != n) return std::nullopt;
        return order;
    }

    /// The unique linear order when reachability is total, otherwise nullopt.
    std::optional<std::vector<std::size_t>> chain_order() const
    {
        const auto n = size();
        std::vector<std::size_t> indeg(n);
        std::vector<std::size_t> ready;
        for (std::size_t v = 0; v < n; ++v) {
            indeg[v] = pred_[v].size();
            if (indeg[v] == 0) ready.push_back(v);
        }
        std::vector<std::size_t> order;
        order.reserve(n);
        while (!ready.empty()) {
            if (ready.size() > 1) return std::nullopt;
            auto u = ready.back();
            ready.pop_back();
            order.push_back(u);
            for (auto v : succ_[u]) {
                if (--indeg[v] == 0) ready.push_back(v);
            }
        }
        if (order.size() != n) return std::nullopt;
        return order;
    }

private:
    std::vector<std::vector<std::size_t>> succ_;
    std::vector<std::vector<std::size_t>> pred_;
    std::size_t n_edges_ = 0;
};

namespace detail {

/// Cover relation of the componentwise order on distinct points.
inline OrderGraph dominance_reduction(std::span<const DesignPoint> points)
{
    const auto n = points.size();
    OrderGraph g(n);
    if (n == 0) return g;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return points[a] < points[b]; });

    if (points[0].dim() == 1) {
        for (std::size_t r = 1; r < n; ++r) g.add_edge(order[r - 1], order[r]);
        return g;
    }

    // Lexicographic order is a linear extension, so every strict predecessor of
    // order[r] sits at a lower rank. below[r] holds ranks strictly below rank r.
    const std::size_t words = (n + 63) / 64;
    std::vector<std::uint64_t> below(n * words, 0);
    std::vector<std::uint64_t> covered(words);
    for (std::size_t r = 0; r < n; ++r) {
        auto* row = &below[r * words];
        const auto& pr = points[order[r]];
        for (std::size_t s = 0; s < r; ++s) {
            if (precedes(points[order[s]], pr)) row[s / 64] |= std::uint64_t{1} << (s % 64);
        }
        std::fill(covered.begin(), covered.end(), 0);
        for (std::size_t s = r; s-- > 0;) {
            const bool is_below = (row[s / 64] >> (s % 64)) & 1U;
            if (!is_below || ((covered[s / 64] >> (s % 64)) & 1U)) continue;
            g.add_edge(order[s], order[r]);
            const auto* srow = &below[s * words];
            for (std::size_t w = 0; w < words; ++w) covered[w] |= srow[w];
        }
    }
    return g;
}

} // namespace detail

/// Distinct design points together with the cover DAG of their componentwise order.
class DesignPoset {
public:
    DesignPoset() = default;

    const std::vector<DesignPoint>& points() const noexcept { return points_; }
    const DesignPoint& point(std::size_t i) const { return points_[i]; }
    const OrderGraph& graph() const noexcept { return graph_; }
    std::size_t size() const noexcept { return points_.size(); }
    std::size_t dim() const noexcept { return points_.empty() ? 0 : points_.front().dim(); }

    std::vector<std::pair<std::size_t, std::size_t>> edges() const { return graph_.edges(); }

    /// True when i ≠ j and points[i] ≼ points[j].
    bool reachable(std::size_t i, std::size_t j) const
    {
        return i != j && precedes(points_[i], points_[j]);
    }

    bool is_chain() const { return dim() == 1 || graph_.chain_order().has_value(); }

    std::optional<std::size_t> find(const DesignPoint& x) const
    {
        auto it = std::lower_bound(sorted_.begin(), sorted_.end(), x,
                                   [&](std::size_t i, const DesignPoint& v) { return points_[i] < v; });
        if (it == sorted_.end() || points_[*it] != x) return std::nullopt;
        return *it;
    }

    /// Sub-poset on the listed node indices; node r of the result is nodes[r] here.
    DesignPoset induced(std::span<const std::size_t> nodes) const
    {
        std::vector<DesignPoint> sub;
        sub.reserve(nodes.size());
        for (auto i : nodes) sub.push_back(points_[i]);
        return DesignPoset(std::move(sub), Unchecked{});
    }

    friend DesignPoset build_poset(std::vector<DesignPoint> points);

private:
    struct Unchecked {};

    DesignPoset(std::vector<DesignPoint> points, Unchecked) : points_(std::move(points))
    {
        graph_ = detail::dominance_reduction(points_);
        sorted_.resize(points_.size());
        std::iota(sorted_.begin(), sorted_.end(), std::size_t{0});
        std::sort(sorted_.begin(), sorted_.end(), [&](auto a, auto b) { return points_[a] < points_[b]; });
    }

    std::vector<DesignPoint> points_;
    OrderGraph graph_;
    std::vector<std::size_t> sorted_;
};

/// Builds the poset of distinct points under componentwise dominance.
inline DesignPoset build_poset(std::vector<DesignPoint> points)
{
    if (!points.empty()) {
        const auto m = points.front().dim();
        if (m == 0) fail(Errc::invalid_argument, "design points need at least one coordinate");
        for (const auto& p : points) {
            if (p.dim() != m) fail(Errc::dimension_mismatch, "mixed point dimensions");
            for (double c : p.coords) {
                if (!std::isfinite(c)) fail(Errc::invalid_argument, "non-finite coordinate");
            }
        }
    }
    DesignPoset poset(std::move(points), DesignPoset::Unchecked{});
    for (std::size_t r = 1; r < poset.sorted_.size(); ++r) {
        if (poset.points_[poset.sorted_[r - 1]] == poset.points_[poset.sorted_[r]]) {
            fail(Errc::duplicate_design_point, "design point listed twice (index " +
                                                   std::to_string(poset.sorted_[r]) + ")");
        }
    }
    return poset;
}

} // namespace isofuse
