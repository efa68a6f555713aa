#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "isofuse/isotonic.hpp"
#include "oracles.hpp"

namespace isofuse {
namespace {

IsotonicProblem chain_problem(std::vector<double> y, std::vector<double> w)
{
    std::vector<DesignPoint> pts;
    for (std::size_t i = 0; i < y.size(); ++i) pts.push_back({static_cast<double>(i)});
    return IsotonicProblem::on(build_poset(pts), std::move(y), std::move(w));
}

/// Two copies of a chain side by side with no constraints between them.
IsotonicProblem two_chains(const std::vector<double>& ya, const std::vector<double>& yb)
{
    IsotonicProblem p;
    p.graph = OrderGraph(ya.size() + yb.size());
    for (std::size_t i = 1; i < ya.size(); ++i) p.graph.add_edge(i - 1, i);
    for (std::size_t i = 1; i < yb.size(); ++i) p.graph.add_edge(ya.size() + i - 1, ya.size() + i);
    p.targets = ya;
    p.targets.insert(p.targets.end(), yb.begin(), yb.end());
    p.weights.assign(p.targets.size(), 1.0);
    return p;
}

void expect_feasible(const IsotonicProblem& p, const IsotonicSolution& s)
{
    for (auto [u, v] : p.graph.edges()) {
        if (s.active(u) && s.active(v)) {
            EXPECT_LE(s.values[u], s.values[v] + 1e-10);
        }
    }
    for (const auto& m : p.merges) {
        for (auto i : m) EXPECT_EQ(s.values[i], s.values[m.front()]);
    }
}

void expect_level_set_means(const IsotonicProblem& p, const IsotonicSolution& s)
{
    for (const auto& block : s.level_sets) {
        double W = 0.0, S = 0.0;
        for (auto i : block) {
            W += p.weights[i];
            S += p.weights[i] * p.targets[i];
        }
        if (W > 0.0) {
            EXPECT_NEAR(s.values[block.front()], S / W, 1e-10);
        }
    }
}

TEST(SolveChain, AlreadyMonotone)
{
    auto sol = solve_chain(chain_problem({1, 2, 3}, {1, 1, 1}));
    EXPECT_EQ(sol.values, (std::vector<double>{1, 2, 3}));
    EXPECT_DOUBLE_EQ(sol.objective, 0.0);
    EXPECT_EQ(sol.distinct_levels(), 3u);
}

TEST(SolveChain, PoolsEverything)
{
    // Oracle: enumeration of contiguous partitions gives (2,2,2) with loss 2.
    auto p = chain_problem({3, 1, 2}, {1, 1, 1});
    EXPECT_NEAR(test::partition_oracle(3, p.graph.edges(), p.targets, p.weights), 2.0, 1e-12);
    auto sol = solve_chain(p);
    for (double v : sol.values) EXPECT_NEAR(v, 2.0, 1e-12);
    EXPECT_NEAR(sol.objective, 2.0, 1e-12);
}

TEST(SolveChain, WeightedPool)
{
    auto p = chain_problem({1, 3, 2}, {1, 1, 2});
    EXPECT_NEAR(test::partition_oracle(3, p.graph.edges(), p.targets, p.weights), 2.0 / 3.0, 1e-12);
    auto sol = solve_chain(p);
    EXPECT_NEAR(sol.values[0], 1.0, 1e-12);
    EXPECT_NEAR(sol.values[1], 7.0 / 3.0, 1e-12);
    EXPECT_NEAR(sol.values[2], 7.0 / 3.0, 1e-12);
    EXPECT_NEAR(sol.objective, 2.0 / 3.0, 1e-12);
}

TEST(SolveChain, RejectsNonChain)
{
    auto p = IsotonicProblem::on(build_poset({{0, 0}, {1, 0}, {0, 1}}), {1, 2, 3}, {1, 1, 1});
    try {
        solve_chain(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::not_a_chain);
    }
}

TEST(SolvePartialOrder, MatchesChainSolver)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise;
    std::uniform_real_distribution<double> wdist(0.2, 3.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> y(10), w(10);
        for (int i = 0; i < 10; ++i) {
            y[i] = 0.3 * i + noise(rng);
            w[i] = wdist(rng);
        }
        auto p = chain_problem(y, w);
        auto a = solve_chain(p);
        auto b = solve_partial_order(p);
        for (int i = 0; i < 10; ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-10);
    }
}

TEST(SolvePartialOrder, TiedChainsClosedForm)
{
    auto p = two_chains({1, 3}, {2, 2});
    p.merges = {{0, 2}};
    auto sol = solve_partial_order(p);
    EXPECT_NEAR(sol.values[0], 1.5, 1e-12);
    EXPECT_NEAR(sol.values[2], 1.5, 1e-12);
    EXPECT_NEAR(sol.values[1], 3.0, 1e-12);
    EXPECT_NEAR(sol.values[3], 2.0, 1e-12);
    EXPECT_NEAR(sol.objective, 0.5, 1e-12);
    expect_feasible(p, sol);
}

TEST(SolvePartialOrder, TwoDimensionalPoolsAll)
{
    auto p = IsotonicProblem::on(build_poset({{0, 0}, {1, 0}, {0, 1}}), {5, 1, 2}, {1, 1, 1});
    // Oracle over all five set partitions of three nodes.
    const double oracle = test::partition_oracle(3, p.graph.edges(), p.targets, p.weights);
    EXPECT_NEAR(oracle, 78.0 / 9.0, 1e-12);
    auto sol = solve_partial_order(p);
    for (double v : sol.values) EXPECT_NEAR(v, 8.0 / 3.0, 1e-12);
    EXPECT_NEAR(sol.objective, oracle, 1e-12);
}

TEST(SolvePartialOrder, ZeroWeightNodeTakesValueBelow)
{
    // 0 -> 1 -> 2 with the middle node unobserved.
    auto p = chain_problem({1, 100, 3}, {1, 0, 1});
    auto sol = solve_partial_order(p);
    EXPECT_DOUBLE_EQ(sol.values[1], 1.0);
    expect_feasible(p, sol);

    // A lone zero-weight source takes the smallest value above it.
    auto q = chain_problem({7, 1, 3}, {0, 1, 1});
    auto s2 = solve_partial_order(q);
    EXPECT_DOUBLE_EQ(s2.values[0], 1.0);
}

TEST(SolvePartialOrder, IsolatedZeroWeightNodeIsUndefined)
{
    IsotonicProblem p;
    p.graph = OrderGraph(3);
    p.graph.add_edge(0, 1);
    p.targets = {1, 2, 5};
    p.weights = {1, 1, 0};
    auto sol = solve_partial_order(p);
    EXPECT_FALSE(sol.active(2));
    EXPECT_TRUE(sol.active(0));
    EXPECT_EQ(sol.level_sets.size(), 2u);
}

TEST(SolvePartialOrder, NoActiveNodes)
{
    auto p = chain_problem({1, 2}, {0, 0});
    try {
        solve_partial_order(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::no_active_nodes);
    }
}

TEST(SolvePartialOrder, MergeOfComparableNodesForcesInterval)
{
    // Merging nodes 0 and 2 on a chain forces node 1 to the same value.
    auto p = chain_problem({4, 0, 2}, {1, 1, 1});
    p.merges = {{0, 2}};
    auto sol = solve_partial_order(p);
    EXPECT_NEAR(sol.values[0], 2.0, 1e-12);
    EXPECT_NEAR(sol.values[1], 2.0, 1e-12);
    EXPECT_NEAR(sol.values[2], 2.0, 1e-12);
}

TEST(SolvePartialOrder, RandomProblemsMatchPartitionOracle)
{
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> noise;
    std::uniform_real_distribution<double> wdist(0.1, 2.0);
    for (int rep = 0; rep < 150; ++rep) {
        const auto dim = static_cast<std::size_t>(1 + rep % 2);
        const auto n = static_cast<std::size_t>(3 + rep % 3);
        auto pts = test::random_points(rng, n, dim, dim == 1 ? 10 : 3);
        auto poset = build_poset(pts);
        std::vector<double> y(n), w(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = pts[i][0] + (dim > 1 ? pts[i][1] : 0.0) + 1.5 * noise(rng);
            w[i] = wdist(rng);
        }
        auto p = IsotonicProblem::on(poset, y, w);
        if (rep % 5 == 1) p.weights[rep % n] = 0.0;
        if (rep % 4 == 2) p.merges = {{0, n - 1}};
        auto sol = solve_partial_order(p);
        expect_feasible(p, sol);
        expect_level_set_means(p, sol);
        const double oracle = test::partition_oracle(n, p.graph.edges(), p.targets, p.weights, p.merges);
        EXPECT_NEAR(sol.objective, oracle, 1e-8) << "rep " << rep;
    }
}

TEST(SolvePartialOrder, Idempotent)
{
    auto poset = build_poset({{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 1}});
    std::vector<double> feasible{0.0, 1.0, 0.5, 2.0, 2.0};
    auto sol = solve_partial_order(IsotonicProblem::on(poset, feasible, std::vector<double>(5, 1.0)));
    EXPECT_NEAR(sol.objective, 0.0, 1e-14);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(sol.values[i], feasible[i], 1e-14);
}

TEST(SolvePartialOrder, AffineEquivariance)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise;
    auto pts = test::random_points(rng, 25, 2, 6);
    auto poset = build_poset(pts);
    std::vector<double> y(25), w(25, 1.0);
    for (auto& v : y) v = noise(rng);
    auto base = solve_partial_order(IsotonicProblem::on(poset, y, w));
    std::vector<double> ty(25);
    for (int i = 0; i < 25; ++i) ty[i] = 2.5 * y[i] - 4.0;
    auto moved = solve_partial_order(IsotonicProblem::on(poset, ty, w));
    for (int i = 0; i < 25; ++i) EXPECT_NEAR(moved.values[i], 2.5 * base.values[i] - 4.0, 1e-9);
}

TEST(SolvePartialOrder, PermutationInvariance)
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise;
    for (int rep = 0; rep < 20; ++rep) {
        auto pts = test::random_points(rng, 30, 2, 7);
        std::vector<double> y(30), w(30);
        for (int i = 0; i < 30; ++i) {
            y[i] = 0.2 * (pts[i][0] + pts[i][1]) + noise(rng);
            w[i] = (i % 7 == 3) ? 0.0 : 1.0 + 0.1 * i;
        }
        std::vector<std::size_t> perm(30);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<DesignPoint> ppts(30);
        std::vector<double> py(30), pw(30);
        for (int i = 0; i < 30; ++i) {
            ppts[i] = pts[perm[i]];
            py[i] = y[perm[i]];
            pw[i] = w[perm[i]];
        }
        auto a = solve_partial_order(IsotonicProblem::on(build_poset(pts), y, w));
        auto b = solve_partial_order(IsotonicProblem::on(build_poset(ppts), py, pw));
        for (int i = 0; i < 30; ++i) {
            if (std::isnan(b.values[i])) EXPECT_TRUE(std::isnan(a.values[perm[i]]));
            else EXPECT_NEAR(b.values[i], a.values[perm[i]], 1e-8);
        }
    }
}

TEST(SolveTiedChains, MatchesGeneralSolver)
{
    std::mt19937_64 rng(77);
    std::normal_distribution<double> noise;
    std::uniform_real_distribution<double> wdist(0.5, 2.0);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t na = 1 + rep % 9, nb = 1 + (rep / 3) % 8;
        std::vector<double> ya(na), wa(na), yb(nb), wb(nb);
        for (std::size_t i = 0; i < na; ++i) {
            ya[i] = 0.4 * i + noise(rng);
            wa[i] = wdist(rng);
        }
        for (std::size_t i = 0; i < nb; ++i) {
            yb[i] = 0.3 * i + 0.5 + noise(rng);
            wb[i] = wdist(rng);
        }
        const std::size_t ta = rep % na, tb = (rep * 7) % nb;
        if (rep % 3 == 0) wb[tb] = 0.0;

        auto fast = solve_tied_chains(ya, wa, ta, yb, wb, tb);

        IsotonicProblem p;
        p.graph = OrderGraph(na + nb);
        for (std::size_t i = 1; i < na; ++i) p.graph.add_edge(i - 1, i);
        for (std::size_t i = 1; i < nb; ++i) p.graph.add_edge(na + i - 1, na + i);
        p.targets = ya;
        p.targets.insert(p.targets.end(), yb.begin(), yb.end());
        p.weights = wa;
        p.weights.insert(p.weights.end(), wb.begin(), wb.end());
        p.merges = {{ta, na + tb}};
        auto general = solve_partial_order(p);
        for (std::size_t i = 0; i < na; ++i) EXPECT_NEAR(fast.first[i], general.values[i], 1e-9) << rep;
        for (std::size_t i = 0; i < nb; ++i) EXPECT_NEAR(fast.second[i], general.values[na + i], 1e-9) << rep;
        EXPECT_DOUBLE_EQ(fast.first[ta], fast.second[tb]);
    }
}

TEST(Interpolate, StepFunction)
{
    auto poset = build_poset({{1}, {2}, {3}});
    auto sol = solve_chain(IsotonicProblem::on(poset, {1, 2, 3}, {1, 1, 1}));
    EXPECT_DOUBLE_EQ(interpolate(sol, poset, DesignPoint{2}), 2.0);
    EXPECT_DOUBLE_EQ(interpolate(sol, poset, DesignPoint{2.5}), 2.0);
    EXPECT_DOUBLE_EQ(interpolate(sol, poset, DesignPoint{10}), 3.0);
    try {
        interpolate(sol, poset, DesignPoint{0.5});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::below_observed_range);
    }
}

TEST(Interpolate, MaxOverDominatedPoints)
{
    auto poset = build_poset({{0, 0}, {1, 0}, {0, 1}});
    IsotonicSolution sol;
    sol.values = {1, 2, 3};
    EXPECT_DOUBLE_EQ(interpolate(sol, poset, DesignPoint{1, 1}), 3.0);
    EXPECT_DOUBLE_EQ(interpolate(sol, poset, DesignPoint{1, 0}), 2.0);
}

} // namespace
} // namespace isofuse
