#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "isofuse/joint_estimator.hpp"
#include "oracles.hpp"

namespace isofuse {
namespace {

const auto unit = ModelFamily::gaussian(1.0);

Dataset rows(std::vector<std::pair<double, double>> xy)
{
    Dataset d;
    for (auto [x, y] : xy) d.rows.push_back({DesignPoint{x}, y, std::nullopt});
    return d;
}

JointProblem manual(std::vector<Dataset> data, std::vector<std::vector<double>> v01)
{
    std::vector<ModelFamily> fam(data.size(), unit);
    auto s = align(data, fam);
    WeightField field(s.K(), s.n(), 0.1);
    for (std::size_t i = 0; i < v01.size(); ++i) {
        for (std::size_t c = 0; c < v01[i].size(); ++c) field.set(0, 1, c, v01[i][c]);
    }
    return make_joint_problem(std::move(s), std::move(field));
}

TEST(JointObjective, Examples)
{
    auto jp = manual({rows({{0, 0}}), rows({{0, 2}})}, {{1.0}});
    EXPECT_DOUBLE_EQ(joint_objective(jp, {{1.0}, {1.0}}), 2.0);
    EXPECT_DOUBLE_EQ(joint_objective(jp, {{0.0}, {2.0}}), 4.0);

    auto free = manual({rows({{0, 0}, {1, 3}}), rows({{0, 2}})}, {{0.0, 0.0}});
    EXPECT_EQ(joint_objective(free, {{0.0, 3.0}, {2.0, std::nan("")}}), 0.0);
    try {
        joint_objective(free, {{0.0, std::nan("")}, {2.0, 0.0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::incomplete_values);
    }
}

TEST(BlockUpdate, PseudoTarget)
{
    auto jp = manual({rows({{0, 0}}), rows({{0, 2}})}, {{1.0}});
    EXPECT_DOUBLE_EQ(block_update(jp, 0, {{0.0}, {2.0}})[0], 1.0);
}

TEST(BlockUpdate, BinomialDataTermCountsRowsNotTrials)
{
    // Five trials per row: proportions 0.2 and 0.6 with one unit of data weight each.
    Dataset a, b;
    a.rows.push_back({DesignPoint{0.0}, 1.0, 5});
    b.rows.push_back({DesignPoint{0.0}, 3.0, 5});
    auto s = align({a, b}, {ModelFamily::binomial(), ModelFamily::binomial()});
    EXPECT_DOUBLE_EQ(s.functions[0].weights[0], 5.0);
    EXPECT_DOUBLE_EQ(s.functions[0].fusion_scale, 0.2);
    WeightField field(2, 1, 0.1);
    field.set(0, 1, 0, 1.0);
    auto jp = make_joint_problem(std::move(s), std::move(field));
    EXPECT_NEAR(block_update(jp, 0, {{0.2}, {0.6}})[0], 0.4, 1e-15);
    EXPECT_NEAR(joint_objective(jp, {{0.4}, {0.4}}), 0.04 + 0.04, 1e-15);
}

TEST(BlockUpdate, BorrowedNodeFollowsLenderWithinOrder)
{
    // k observes x=0 and x=2; x=1 is lent by p.
    auto jp = manual({rows({{0, 1}, {2, 2}}), rows({{0, 1}, {1, 5}, {2, 2}})}, {{0.0, 1.0, 0.0}});
    ASSERT_EQ(jp.active_sets[0], (std::vector<std::size_t>{0, 1, 2}));
    auto out = block_update(jp, 0, {{1, 1.5, 2}, {1.0, 1.5, 2.0}});
    EXPECT_NEAR(out[1], 1.5, 1e-12);
    // Lender far above: projected onto k's constraints, pooled with x=2.
    out = block_update(jp, 0, {{1, 1.5, 2}, {1.0, 5.0, 2.0}});
    EXPECT_NEAR(out[1], 3.5, 1e-12);
    EXPECT_NEAR(out[2], 3.5, 1e-12);
}

TEST(FitJoint, SingleFunctionIsSeparateFit)
{
    auto s = align({rows({{0, 3}, {1, 1}, {2, 2}})}, {unit});
    auto jp = make_joint_problem(s, build_weight_field(s));
    auto fit = fit_joint(jp);
    EXPECT_TRUE(fit.converged);
    EXPECT_EQ(fit.iterations, 1u);
    for (double v : fit.values[0]) EXPECT_NEAR(v, 2.0, 1e-12);
}

TEST(FitJoint, IdenticalDataReproduceSeparateFit)
{
    auto d = rows({{0, 0.5}, {1, 0.2}, {2, 1.4}, {3, 1.0}, {4, 2.2}});
    auto s = align({d, d}, {unit, unit});
    auto jp = make_joint_problem(s, build_weight_field(s));
    auto fit = fit_joint(jp);
    auto sep = solve(IsotonicProblem::on(s.poset, s.functions[0].targets, s.functions[0].weights));
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_NEAR(fit.values[0][i], sep.values[i], 1e-10);
        EXPECT_NEAR(fit.values[1][i], sep.values[i], 1e-10);
    }
}

TEST(FitJoint, ZeroWeightsGiveSeparateFits)
{
    auto jp = manual({rows({{0, 3}, {1, 1}, {2, 5}}), rows({{0, 0}, {1, 2}, {2, 1}})}, {});
    auto fit = fit_joint(jp);
    EXPECT_EQ(fit.values[0], (std::vector<double>{2, 2, 5}));
    EXPECT_EQ(fit.values[1], (std::vector<double>{0, 1.5, 1.5}));
}

struct RandomCase {
    JointProblem problem;
    double oracle;
};

RandomCase random_case(std::mt19937_64& rng, std::size_t n, bool random_weights)
{
    std::normal_distribution<double> noise;
    std::uniform_real_distribution<double> unif;
    std::vector<std::pair<double, double>> a, b;
    for (std::size_t i = 0; i < n; ++i) {
        a.emplace_back(i, 0.5 * i + noise(rng));
        b.emplace_back(i, 0.3 * i + noise(rng));
    }
    std::vector<double> vs(n);
    for (auto& v : vs) v = random_weights ? unif(rng) : 1.0;
    auto jp = manual({rows(a), rows(b)}, {vs});
    std::vector<double> y, w;
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            y.push_back(jp.sample.functions[k].targets[i]);
            w.push_back(jp.sample.functions[k].weights[i]);
        }
    }
    std::vector<test::QuadraticTerm> coupling;
    for (std::size_t i = 0; i < n; ++i) coupling.push_back({i, n + i, vs[i]});
    std::vector<std::pair<std::size_t, std::size_t>> cons;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        cons.emplace_back(i, i + 1);
        cons.emplace_back(n + i, n + i + 1);
    }
    double oracle = test::active_set_qp_oracle(y, w, coupling, cons);
    return {std::move(jp), oracle};
}

TEST(FitJoint, MatchesExhaustiveOracle)
{
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 80; ++rep) {
        auto c = random_case(rng, 2 + rep % 3, rep % 2 == 1);
        auto fit = fit_joint(c.problem, {.tol = 1e-12});
        ASSERT_TRUE(fit.converged);
        EXPECT_NEAR(fit.objective_trace.back(), c.oracle, 1e-6);
    }
}

TEST(FitJoint, DescentOrderInvarianceAndRange)
{
    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise;
    for (int rep = 0; rep < 15; ++rep) {
        std::vector<Dataset> data(3);
        double lo = 1e300, hi = -1e300;
        for (std::size_t k = 0; k < 3; ++k) {
            for (int i = 0; i < 25; ++i) {
                if ((i + k) % 5 == 0) continue;
                const double y = 0.1 * i + 0.2 * k + 0.5 * noise(rng);
                lo = std::min(lo, y);
                hi = std::max(hi, y);
                data[k].rows.push_back({DesignPoint{i / 5.0}, y, std::nullopt});
            }
        }
        auto s = align(data, {unit, unit, unit});
        auto jp = make_joint_problem(s, build_weight_field(s));
        const double tol = 1e-9;
        auto fwd = fit_joint(jp, {.tol = tol});
        auto rev = fit_joint(jp, {.tol = tol, .reverse_order = true});
        ASSERT_TRUE(fwd.converged && rev.converged);
        for (std::size_t t = 1; t < fwd.objective_trace.size(); ++t) {
            EXPECT_LE(fwd.objective_trace[t], fwd.objective_trace[t - 1] + 1e-9);
        }
        for (std::size_t k = 0; k < 3; ++k) {
            for (auto i : jp.active_sets[k]) {
                EXPECT_NEAR(fwd.values[k][i], rev.values[k][i], 10 * tol);
                EXPECT_GE(fwd.values[k][i], lo - 1e-12);
                EXPECT_LE(fwd.values[k][i], hi + 1e-12);
            }
            // A fixed point: one more update barely moves.
            auto again = block_update(jp, k, fwd.values);
            for (auto i : jp.active_sets[k]) EXPECT_NEAR(again[i], fwd.values[k][i], 1e-7);
        }
    }
}

TEST(FitJoint, BorrowedOnlyFlags)
{
    auto s = align({rows({{0, 0}, {2, 2}}), rows({{0, 0}, {1, 1}, {2, 2}})}, {unit, unit});
    auto jp = make_joint_problem(s, build_weight_field(s));
    auto fit = fit_joint(jp);
    EXPECT_EQ(fit.borrowed_only[0], (std::vector<char>{0, 1, 0}));
    EXPECT_EQ(fit.borrowed_only[1], (std::vector<char>{0, 0, 0}));
    EXPECT_NEAR(fit.values[0][1], 1.0, 1e-8);
    EXPECT_NEAR(predict(fit, s.poset, 0, DesignPoint{1.5}), fit.values[0][1], 0.0);
}

TEST(FitJoint, PlaneGridRuns)
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> noise;
    std::vector<Dataset> data(2);
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            data[0].rows.push_back({DesignPoint{double(a), double(b)}, a + b + noise(rng), std::nullopt});
            data[1].rows.push_back({DesignPoint{double(a), double(b)}, a + 0.9 * b + noise(rng), std::nullopt});
        }
    }
    auto s = align(data, {unit, unit});
    auto jp = make_joint_problem(s, build_weight_field(s));
    auto fit = fit_joint(jp);
    ASSERT_TRUE(fit.converged);
    for (std::size_t k = 0; k < 2; ++k) {
        for (auto [u, v] : s.poset.edges()) EXPECT_LE(fit.values[k][u], fit.values[k][v] + 1e-10);
    }
}

} // namespace
} // namespace isofuse
