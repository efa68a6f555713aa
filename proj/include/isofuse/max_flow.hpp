#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

namespace isofuse::detail {

// Dinic's algorithm on real-valued capacities. Residual capacities at or below
// `eps` count as saturated.
class MaxFlow {
public:
    static constexpr double infinity = std::numeric_limits<double>::infinity();

    MaxFlow(std::size_t n, double eps) : adj_(n), level_(n), it_(n), eps_(eps) {}

    void add_edge(std::size_t from, std::size_t to, double cap)
    {
        adj_[from].push_back(edges_.size());
        edges_.push_back({to, cap});
        adj_[to].push_back(edges_.size());
        edges_.push_back({from, 0.0});
    }

    double run(std::size_t s, std::size_t t)
    {
        double total = 0.0;
        while (bfs(s, t)) {
            std::fill(it_.begin(), it_.end(), 0);
            for (;;) {
                double f = dfs(s, t, infinity);
                if (f <= eps_) break;
                total += f;
            }
        }
        return total;
    }

    /// Nodes reachable from s in the residual graph (call after run()).
    std::vector<char> source_side(std::size_t s) const
    {
        std::vector<char> seen(adj_.size(), 0);
        std::vector<std::size_t> stack{s};
        seen[s] = 1;
        while (!stack.empty()) {
            auto u = stack.back();
            stack.pop_back();
            for (auto e : adj_[u]) {
                const auto& ed = edges_[e];
                if (ed.cap > eps_ && !seen[ed.to]) {
                    seen[ed.to] = 1;
                    stack.push_back(ed.to);
                }
            }
        }
        return seen;
    }

private:
    struct Edge {
        std::size_t to;
        double cap;
    };

    bool bfs(std::size_t s, std::size_t t)
    {
        std::fill(level_.begin(), level_.end(), -1);
        std::queue<std::size_t> q;
        level_[s] = 0;
        q.push(s);
        while (!q.empty()) {
            auto u = q.front();
            q.pop();
            for (auto e : adj_[u]) {
                const auto& ed = edges_[e];
                if (ed.cap > eps_ && level_[ed.to] < 0) {
                    level_[ed.to] = level_[u] + 1;
                    q.push(ed.to);
                }
            }
        }
        return level_[t] >= 0;
    }

    double dfs(std::size_t u, std::size_t t, double pushed)
    {
        if (u == t) return pushed;
        for (auto& i = it_[u]; i < adj_[u].size(); ++i) {
            auto e = adj_[u][i];
            auto& ed = edges_[e];
            if (ed.cap <= eps_ || level_[ed.to] != level_[u] + 1) continue;
            double f = dfs(ed.to, t, std::min(pushed, ed.cap));
            if (f > eps_) {
                ed.cap -= f;
                edges_[e ^ 1].cap += f;
                return f;
            }
        }
        return 0.0;
    }

    std::vector<std::vector<std::size_t>> adj_;
    std::vector<Edge> edges_;
    std::vector<int> level_;
    std::vector<std::size_t> it_;
    double eps_;
};

} // namespace isofuse::detail
