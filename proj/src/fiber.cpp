#include "measureflow/fiber.hpp"

#include <algorithm>
#include <cmath>

#include "measureflow/errors.hpp"
#include "measureflow/generalized.hpp"
#include "measureflow/simplex_lp.hpp"

namespace mflow {

namespace {

// First-stage LP optimum and the network-simplex value must agree to this.
constexpr double kStageAgreement = 1e-7;

struct PairVars {
    std::vector<std::size_t> src, tgt;
    std::vector<double> base, velocity;
};

PairVars enumerate_pairs(const LiftedMeasure& v1, const LiftedMeasure& v2, double prune) {
    PairVars p;
    for (std::size_t a = 0; a < v1.size(); ++a) {
        for (std::size_t b = 0; b < v2.size(); ++b) {
            const double d = euclidean_distance(v1.base(a), v2.base(b));
            if (!(d < prune)) continue;
            p.src.push_back(a);
            p.tgt.push_back(b);
            p.base.push_back(d);
            p.velocity.push_back(euclidean_distance(v1.velocity(a), v2.velocity(b)));
        }
    }
    return p;
}

TransportPlan extract_plan(const PairVars& p, const std::vector<double>& x) {
    TransportPlan plan;
    for (std::size_t k = 0; k < x.size(); ++k)
        if (x[k] > 0.0) plan.entries.push_back({p.src[k], p.tgt[k], x[k]});
    return plan;
}

void check_dims(const LiftedMeasure& v1, const LiftedMeasure& v2) {
    if (v1.dim() != v2.dim()) throw DimensionMismatch("lifted measures live in different dimensions");
}

}  // namespace

FiberResult fiber_w(const LiftedMeasure& v1, const LiftedMeasure& v2, const FiberOptions& options) {
    check_dims(v1, v2);
    require_equal_mass(v1.joint(), v2.joint());
    FiberResult out;
    if (v1.empty() || v2.empty()) return out;

    const auto pairs = enumerate_pairs(v1, v2, INFINITY);
    LinearProgram lp;
    lp.variables = pairs.src.size();
    lp.objective = pairs.base;
    std::vector<double> w1(v1.size()), w2(v2.size());
    for (std::size_t a = 0; a < v1.size(); ++a) w1[a] = v1.weight(a);
    for (std::size_t b = 0; b < v2.size(); ++b) w2[b] = v2.weight(b);
    // Absorb the sub-tolerance mass gap so the marginal system is consistent.
    const double gap = exact_sum(w1) - exact_sum(w2);
    if (gap > 0.0)
        *std::max_element(w1.begin(), w1.end()) -= gap;
    else if (gap < 0.0)
        *std::max_element(w2.begin(), w2.end()) += gap;

    std::vector<std::vector<std::pair<std::size_t, double>>> rows(v1.size()), cols(v2.size());
    for (std::size_t k = 0; k < pairs.src.size(); ++k) {
        rows[pairs.src[k]].push_back({k, 1.0});
        cols[pairs.tgt[k]].push_back({k, 1.0});
    }
    for (std::size_t a = 0; a < v1.size(); ++a) lp.add_row(std::move(rows[a]), RowSense::equal, w1[a]);
    for (std::size_t b = 0; b < v2.size(); ++b) lp.add_row(std::move(cols[b]), RowSense::equal, w2[b]);

    const auto sol =
        solve_lp_lexicographic(lp, pairs.velocity, [&](double w) { return options.eps_rel * (1.0 + std::abs(w)); });
    if (sol.status != LpStatus::optimal) throw SolverError("fiber LP did not reach an optimum");

    const double reference = wasserstein1(base_projection(v1), base_projection(v2)).distance;
    if (std::abs(sol.primary - reference) > kStageAgreement * (1.0 + reference))
        throw SolverError("first-stage LP optimum disagrees with the network simplex");

    out.value = std::max(0.0, sol.secondary);
    out.base_cost = reference;
    out.slack = sol.slack;
    out.plan = extract_plan(pairs, sol.x);
    return out;
}

FiberResult fiber_wg(const LiftedMeasure& v1, const LiftedMeasure& v2, const FiberOptions& options) {
    check_dims(v1, v2);
    FiberResult out;
    const double reference = generalized_wasserstein(base_projection(v1), base_projection(v2)).distance;
    out.base_cost = reference;
    if (v1.empty() || v2.empty()) return out;

    // Pairs at base distance >= 2 cannot carry mass in any optimal decomposition.
    const auto pairs = enumerate_pairs(v1, v2, 2.0);
    if (pairs.src.empty()) return out;
    LinearProgram lp;
    lp.variables = pairs.src.size();
    lp.objective.resize(lp.variables);
    for (std::size_t k = 0; k < lp.variables; ++k) lp.objective[k] = pairs.base[k] - 2.0;
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(v1.size()), cols(v2.size());
    for (std::size_t k = 0; k < pairs.src.size(); ++k) {
        rows[pairs.src[k]].push_back({k, 1.0});
        cols[pairs.tgt[k]].push_back({k, 1.0});
    }
    // Inequality marginals: the unmatched remainder of each atom is removed.
    for (std::size_t a = 0; a < v1.size(); ++a)
        if (!rows[a].empty()) lp.add_row(std::move(rows[a]), RowSense::less_equal, v1.weight(a));
    for (std::size_t b = 0; b < v2.size(); ++b)
        if (!cols[b].empty()) lp.add_row(std::move(cols[b]), RowSense::less_equal, v2.weight(b));

    const double offset = v1.mass() + v2.mass();
    const auto sol = solve_lp_lexicographic(lp, pairs.velocity, [&](double primary) {
        return options.eps_rel * (1.0 + std::abs(primary + offset));
    });
    if (sol.status != LpStatus::optimal) throw SolverError("fiber LP did not reach an optimum");
    if (std::abs(sol.primary + offset - reference) > kStageAgreement * (1.0 + reference))
        throw SolverError("first-stage LP optimum disagrees with the network simplex");

    out.value = std::max(0.0, sol.secondary);
    out.slack = sol.slack;
    out.plan = extract_plan(pairs, sol.x);
    return out;
}

WwReport ww_report(const LiftedMeasure& v1, const LiftedMeasure& v2, double tolerance) {
    check_dims(v1, v2);
    WwReport r;
    const auto b1 = base_projection(v1);
    const auto b2 = base_projection(v2);
    const double m1 = v1.mass(), m2 = v2.mass();
    r.balanced = std::abs(m1 - m2) <= kMassTolerance * std::max({1.0, m1, m2});
    if (r.balanced) {
        r.lifted_w = wasserstein1(v1.joint(), v2.joint()).distance;
        r.fiber_w = fiber_w(v1, v2).value;
        r.base_w = wasserstein1(b1, b2).distance;
        r.w_holds = r.lifted_w <= r.fiber_w + r.base_w + tolerance * (1.0 + r.fiber_w + r.base_w);
    }
    r.lifted_gw = generalized_wasserstein(v1.joint(), v2.joint()).distance;
    r.fiber_wg = fiber_wg(v1, v2).value;
    r.base_gw = generalized_wasserstein(b1, b2).distance;
    r.gw_holds = r.lifted_gw <= r.fiber_wg + r.base_gw + tolerance * (1.0 + r.fiber_wg + r.base_gw);
    return r;
}

bool check_ww_inequalities(const LiftedMeasure& v1, const LiftedMeasure& v2) {
    const auto r = ww_report(v1, v2);
    return r.w_holds && r.gw_holds;
}

}  // namespace mflow
