#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <tuple>
#include <vector>

#include "isofuse/chi_squared.hpp"
#include "isofuse/error.hpp"
#include "isofuse/isotonic.hpp"
#include "isofuse/parallel.hpp"
#include "isofuse/sample.hpp"

namespace isofuse {

struct PairTestResult {
    std::size_t k = 0;
    std::size_t p = 0;
    std::size_t t = 0;
    double lr = 0.0;
    bool constrained_active = false;
    double weight = 1.0;
};

/// Null (tied) and alternative (separate) fits of a function pair. Vectors
/// run over the union design; NaN marks nodes outside a function's problem.
struct PairFits {
    std::vector<double> null_k, null_p;
    std::vector<double> alt_k, alt_p;
    double tied_value = 0.0;
};

/// Fusion weight for a test statistic: 1 at lr = 0, falling linearly to 0
/// at the chi-squared critical value.
inline double weight_from_lr(double lr, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::domain_error, "alpha must lie in (0,1)");
    if (lr < 0.0) fail(Errc::invalid_argument, "negative test statistic");
    if (lr == 0.0) return 1.0;
    return std::max(0.0, 1.0 - lr / chi2_quantile_1df(1.0 - alpha));
}

/// Symmetric fusion weights v(k, p, i) plus the tests that produced them.
class WeightField {
public:
    WeightField() = default;
    WeightField(std::size_t K, std::size_t n, double alpha)
        : K_(K), n_(n), alpha_(alpha), v_(K > 1 ? K * (K - 1) / 2 * n : 0, 0.0)
    {
    }

    std::size_t K() const noexcept { return K_; }
    std::size_t n() const noexcept { return n_; }
    double alpha() const noexcept { return alpha_; }

    double operator()(std::size_t k, std::size_t p, std::size_t i) const
    {
        if (k == p) return 0.0;
        return v_[slot(k, p) * n_ + i];
    }
    void set(std::size_t k, std::size_t p, std::size_t i, double v)
    {
        if (k == p) fail(Errc::invalid_argument, "a function has no weight with itself");
        v_[slot(k, p) * n_ + i] = v;
    }

    const std::vector<PairTestResult>& tests() const noexcept { return tests_; }
    void add_test(const PairTestResult& r) { tests_.push_back(r); }

    /// Clamp every weight to at most 1/(K-1).
    void cap()
    {
        if (K_ < 2) return;
        const double c = 1.0 / static_cast<double>(K_ - 1);
        for (auto& v : v_) v = std::min(v, c);
    }

private:
    std::size_t slot(std::size_t k, std::size_t p) const
    {
        if (k > p) std::swap(k, p);
        if (p >= K_) fail(Errc::invalid_argument, "function index out of range");
        return k * K_ - k * (k + 1) / 2 + (p - k - 1);
    }

    std::size_t K_ = 0, n_ = 0;
    double alpha_ = 0.1;
    std::vector<double> v_;
    std::vector<PairTestResult> tests_;
};

/// Runs tied-node likelihood-ratio tests on an aligned sample. The separate
/// fit of each function does not depend on the tested point and is computed
/// once up front.
class PairTester {
public:
    explicit PairTester(const JointSample& sample) : s_(sample)
    {
        const auto K = s_.K();
        alt_.resize(K);
        nodes_.resize(K);
        if (!s_.chain_rank) sub_.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            const auto& f = s_.functions[k];
            nodes_[k] = f.observed;
            if (s_.chain_rank) {
                const auto& rank = *s_.chain_rank;
                std::sort(nodes_[k].begin(), nodes_[k].end(), [&](auto a, auto b) { return rank[a] < rank[b]; });
            }
            std::vector<double> y, w;
            for (auto i : nodes_[k]) {
                y.push_back(f.targets[i]);
                w.push_back(f.weights[i]);
            }
            std::vector<double> fit;
            if (s_.chain_rank) {
                fit = detail::expand_blocks(detail::pool_adjacent_violators(y, w), y.size());
            } else {
                sub_[k] = s_.poset.induced(nodes_[k]);
                fit = solve(IsotonicProblem::on(*sub_[k], y, w)).values;
            }
            alt_[k].assign(s_.n(), std::numeric_limits<double>::quiet_NaN());
            for (std::size_t r = 0; r < nodes_[k].size(); ++r) alt_[k][nodes_[k][r]] = fit[r];
        }
    }

    const JointSample& sample() const noexcept { return s_; }
    const std::vector<double>& separate_fit(std::size_t k) const { return alt_[k]; }

    PairFits tied_pair_fit(std::size_t k, std::size_t p, std::size_t t) const
    {
        check(k, p, t);
        const auto& fk = s_.functions[k];
        const auto& fp = s_.functions[p];
        if (!fk.observes(t) && !fp.observes(t)) {
            fail(Errc::point_not_testable, "neither function observes the tested point");
        }
        auto [nk, tk] = with_point(k, t);
        auto [np, tp] = with_point(p, t);
        auto yk = gather(fk.targets, nk), wk = gather(fk.weights, nk);
        auto yp = gather(fp.targets, np), wp = gather(fp.weights, np);

        std::vector<double> vk, vp;
        double tied = 0.0;
        if (s_.chain_rank) {
            auto sol = solve_tied_chains(yk, wk, tk, yp, wp, tp);
            vk = std::move(sol.first);
            vp = std::move(sol.second);
            tied = sol.tied_value;
        } else {
            const auto gk = graph_for(k, nk);
            const auto gp = graph_for(p, np);
            const auto off = nk.size();
            IsotonicProblem prob;
            prob.graph = OrderGraph(off + np.size());
            for (auto [u, v] : gk.edges()) prob.graph.add_edge(u, v);
            for (auto [u, v] : gp.edges()) prob.graph.add_edge(off + u, off + v);
            prob.targets = yk;
            prob.targets.insert(prob.targets.end(), yp.begin(), yp.end());
            prob.weights = wk;
            prob.weights.insert(prob.weights.end(), wp.begin(), wp.end());
            prob.merges = {{tk, off + tp}};
            auto sol = solve_partial_order(prob);
            vk.assign(sol.values.begin(), sol.values.begin() + static_cast<std::ptrdiff_t>(off));
            vp.assign(sol.values.begin() + static_cast<std::ptrdiff_t>(off), sol.values.end());
            tied = vk[tk];
        }
        PairFits out;
        out.null_k = scatter(vk, nk);
        out.null_p = scatter(vp, np);
        out.alt_k = alt_[k];
        out.alt_p = alt_[p];
        out.tied_value = tied;
        return out;
    }

    /// −2 × log-likelihood gap between tied and separate fits over both
    /// functions' observed nodes.
    double lr_statistic(std::size_t k, std::size_t p, const PairFits& fits) const
    {
        double lr = 0.0, scale = 0.0;
        auto add = [&](std::size_t f, const std::vector<double>& null_fit, const std::vector<double>& alt_fit) {
            const auto& fs = s_.functions[f];
            for (auto i : fs.observed) {
                const double g = node_deviance_gap(fs.nodes[i], fs.family, null_fit[i], alt_fit[i]);
                lr += g;
                scale += std::abs(g);
            }
        };
        add(k, fits.null_k, fits.alt_k);
        add(p, fits.null_p, fits.alt_p);
        if (lr < 0.0) {
            if (lr < -1e-10 * std::max(1.0, scale)) {
                fail(Errc::null_beats_alternative, "tied fit has higher likelihood than separate fits");
            }
            lr = 0.0;
        }
        return lr;
    }

    PairTestResult test(std::size_t k, std::size_t p, std::size_t t, double alpha) const
    {
        auto fits = tied_pair_fit(k, p, t);
        PairTestResult r;
        r.k = std::min(k, p);
        r.p = std::max(k, p);
        r.t = t;
        r.lr = lr_statistic(k, p, fits);
        for (auto [f, nf, af] : {std::tuple{k, &fits.null_k, &fits.alt_k}, std::tuple{p, &fits.null_p, &fits.alt_p}}) {
            for (auto i : s_.functions[f].observed) {
                if (std::abs((*nf)[i] - (*af)[i]) > 1e-9) r.constrained_active = true;
            }
        }
        r.weight = weight_from_lr(r.lr, alpha);
        return r;
    }

private:
    void check(std::size_t k, std::size_t p, std::size_t t) const
    {
        if (k >= s_.K() || p >= s_.K() || k == p) fail(Errc::invalid_argument, "invalid function pair");
        if (t >= s_.n()) fail(Errc::invalid_argument, "design point index out of range");
    }

    // Function f's node list with t included; returns the list and t's position.
    std::pair<std::vector<std::size_t>, std::size_t> with_point(std::size_t f, std::size_t t) const
    {
        auto nodes = nodes_[f];
        if (s_.functions[f].observes(t)) {
            return {nodes, static_cast<std::size_t>(std::find(nodes.begin(), nodes.end(), t) - nodes.begin())};
        }
        std::vector<std::size_t>::iterator it;
        if (s_.chain_rank) {
            const auto& rank = *s_.chain_rank;
            it = std::lower_bound(nodes.begin(), nodes.end(), t, [&](auto a, auto b) { return rank[a] < rank[b]; });
        } else {
            it = nodes.end();
        }
        auto pos = static_cast<std::size_t>(it - nodes.begin());
        nodes.insert(it, t);
        return {nodes, pos};
    }

    OrderGraph graph_for(std::size_t f, const std::vector<std::size_t>& nodes) const
    {
        if (nodes.size() == nodes_[f].size()) return sub_[f]->graph();
        return s_.poset.induced(nodes).graph();
    }

    static std::vector<double> gather(const std::vector<double>& v, const std::vector<std::size_t>& idx)
    {
        std::vector<double> out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(v[i]);
        return out;
    }

    std::vector<double> scatter(const std::vector<double>& v, const std::vector<std::size_t>& idx) const
    {
        std::vector<double> out(s_.n(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t r = 0; r < idx.size(); ++r) out[idx[r]] = v[r];
        return out;
    }

    const JointSample& s_;
    std::vector<std::vector<double>> alt_;
    std::vector<std::vector<std::size_t>> nodes_;
    std::vector<std::optional<DesignPoset>> sub_;
};

/// Tests two datasets at design point `t` on their own union design.
inline PairFits tied_pair_fit(const Dataset& data_k, const Dataset& data_p, const DesignPoint& t,
                              const ModelFamily& family_k, const ModelFamily& family_p)
{
    auto s = align({data_k, data_p}, {family_k, family_p});
    auto idx = s.poset.find(t);
    if (!idx) fail(Errc::point_not_testable, "tested point is not in either design");
    return PairTester(s).tied_pair_fit(0, 1, *idx);
}

/// True when x_i lies outside function f's observed range: unobserved by f
/// and either below every observation of f or below none of them.
inline std::vector<char> extrapolation_mask(const JointSample& s, std::size_t f)
{
    const auto& fs = s.functions[f];
    std::vector<char> mask(s.n(), 0);
    for (std::size_t i = 0; i < s.n(); ++i) {
        if (fs.observes(i)) continue;
        bool all = true, none = true;
        for (auto j : fs.observed) {
            if (precedes(s.poset.point(i), s.poset.point(j))) {
                none = false;
            } else {
                all = false;
            }
        }
        mask[i] = all || none;
    }
    return mask;
}

struct WeightFieldOptions {
    double alpha = 0.1;
    bool extrapolation_mask = true;
    bool cap = false;
    unsigned threads = 1;
};

/// Tests every unordered pair at every point observed by at least one of the
/// two functions and stores the resulting fusion weights.
inline WeightField build_weight_field(const JointSample& s, const WeightFieldOptions& opt = {})
{
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) fail(Errc::domain_error, "alpha must lie in (0,1)");
    const auto K = s.K(), n = s.n();
    WeightField field(K, n, opt.alpha);
    if (K < 2) return field;

    PairTester tester(s);
    std::vector<std::vector<char>> masks(K);
    for (std::size_t k = 0; k < K; ++k) {
        masks[k] = opt.extrapolation_mask ? extrapolation_mask(s, k) : std::vector<char>(n, 0);
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t p = k + 1; p < K; ++p) pairs.emplace_back(k, p);
    }
    std::vector<std::optional<PairTestResult>> cells(pairs.size() * n);
    parallel_for(cells.size(), opt.threads, [&](std::size_t c) {
        auto [k, p] = pairs[c / n];
        const auto i = c % n;
        if (!s.functions[k].observes(i) && !s.functions[p].observes(i)) return;
        if (masks[k][i] || masks[p][i]) return;
        cells[c] = tester.test(k, p, i, opt.alpha);
    });
    for (const auto& cell : cells) {
        if (!cell) continue;
        field.set(cell->k, cell->p, cell->t, cell->weight);
        field.add_test(*cell);
    }
    if (opt.cap) field.cap();
    return field;
}

} // namespace isofuse
