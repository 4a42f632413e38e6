#include "measureflow/generalized.hpp"

#include <algorithm>
#include <cmath>

#include "coupling_internal.hpp"
#include "measureflow/errors.hpp"

namespace mflow {

namespace {

constexpr double kRemovalCost = 1.0;
constexpr double kPruneDistance = 2.0 * kRemovalCost;

SignedDecomposition kept_part(const DiscreteMeasure& m, const std::vector<double>& kept_weights) {
    std::vector<double> pos, w;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!(kept_weights[i] > 0.0)) continue;
        const auto x = m.position(i);
        pos.insert(pos.end(), x.begin(), x.end());
        w.push_back(std::min(kept_weights[i], m.weight(i)));
    }
    SignedDecomposition d{DiscreteMeasure(m.dim(), pos, w, MergePolicy{-1, 0.0}), 0.0};
    d.removed_mass = std::max(0.0, m.mass() - d.kept.mass());
    return d;
}

}  // namespace

GwSolution generalized_wasserstein(const DiscreteMeasure& m1, const DiscreteMeasure& m2,
                                   const TransportOptions& options) {
    if (m1.dim() != m2.dim()) throw DimensionMismatch("measures live in different dimensions");
    auto cancelled = detail::cancel_common_mass(m1, m2);
    auto& a = cancelled.first;
    auto& b = cancelled.second;

    std::vector<PlanEntry> entries = std::move(cancelled.common);
    if (!a.empty() && !b.empty()) {
        if (m1.dim() == 1 && a.size() * b.size() > options.dense_pair_limit) {
            const auto line = detail::solve_line_flow(m1, a, m2, b, true, options.pivot);
            auto ka = a, kb = b;
            for (std::size_t k = 0; k < ka.size(); ++k) ka[k].weight = std::max(0.0, ka[k].weight - line.removed_first[k]);
            for (std::size_t k = 0; k < kb.size(); ++k) kb[k].weight = std::max(0.0, kb[k].weight - line.removed_second[k]);
            std::erase_if(ka, [](const detail::ResidualAtom& r) { return !(r.weight > 0.0); });
            std::erase_if(kb, [](const detail::ResidualAtom& r) { return !(r.weight > 0.0); });
            auto mono = detail::monotone_coupling(ka, kb);
            entries.insert(entries.end(), mono.begin(), mono.end());
        } else {
            // Bipartite network plus a removal node joined to every atom at unit cost.
            const std::size_t na = a.size(), nb = b.size();
            const std::size_t trash = na + nb;
            std::vector<double> supply(na + nb + 1, 0.0);
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < na; ++i) s1 += supply[i] = a[i].weight;
            for (std::size_t j = 0; j < nb; ++j) {
                supply[na + j] = -b[j].weight;
                s2 += b[j].weight;
            }
            supply[trash] = s2 - s1;
            std::vector<FlowArc> arcs;
            for (std::size_t i = 0; i < na; ++i) {
                for (std::size_t j = 0; j < nb; ++j) {
                    const double d = euclidean_distance(m1.position(a[i].index), m2.position(b[j].index));
                    if (d < kPruneDistance) arcs.push_back({i, na + j, d});
                }
            }
            const std::size_t transport_arcs = arcs.size();
            for (std::size_t i = 0; i < na; ++i) arcs.push_back({i, trash, kRemovalCost});
            for (std::size_t j = 0; j < nb; ++j) arcs.push_back({trash, na + j, kRemovalCost});
            const FlowSolution sol = min_cost_flow(supply.size(), arcs, supply, options.pivot);
            for (std::size_t e = 0; e < transport_arcs; ++e) {
                if (sol.flow[e] > 0.0)
                    entries.push_back({a[arcs[e].source].index, b[arcs[e].target - na].index, sol.flow[e]});
            }
        }
    }
    detail::sort_and_merge(entries);

    GwSolution out;
    out.plan.entries = std::move(entries);
    auto rows = out.plan.row_sums(m1.size());
    auto cols = out.plan.column_sums(m2.size());
    out.kept1 = kept_part(m1, rows);
    out.kept2 = kept_part(m2, cols);
    out.transport_cost = plan_cost(out.plan, m1, m2);
    out.distance = out.kept1.removed_mass + out.kept2.removed_mass + out.transport_cost;
    return out;
}

DualProbe gw_dual_probe(const DiscreteMeasure& m1, const DiscreteMeasure& m2, const TestFn& f) {
    if (m1.dim() != m2.dim()) throw DimensionMismatch("measures live in different dimensions");
    DualProbe out;
    double sup = 0.0;
    for (std::size_t i = 0; i < m1.size(); ++i) {
        const double v = f(m1.position(i));
        sup = std::max(sup, std::abs(v));
        out.value += m1.weight(i) * v;
    }
    for (std::size_t j = 0; j < m2.size(); ++j) {
        const double v = f(m2.position(j));
        sup = std::max(sup, std::abs(v));
        out.value -= m2.weight(j) * v;
    }
    const double tol = 1e-9;
    out.admissible = sup <= 1.0 + tol && support_lipschitz(m1, m2, f) <= 1.0 + tol;
    return out;
}

bool integral_bound_check(const TestFn& f, const DiscreteMeasure& m1, const DiscreteMeasure& m2) {
    double sup = 0.0, lhs = 0.0;
    for (std::size_t i = 0; i < m1.size(); ++i) {
        const double v = f(m1.position(i));
        sup = std::max(sup, std::abs(v));
        lhs += m1.weight(i) * v;
    }
    for (std::size_t j = 0; j < m2.size(); ++j) {
        const double v = f(m2.position(j));
        sup = std::max(sup, std::abs(v));
        lhs -= m2.weight(j) * v;
    }
    const double k = std::max(sup, support_lipschitz(m1, m2, f));
    const double w = generalized_wasserstein(m1, m2).distance;
    return lhs <= k * w + 1e-9 * std::max(1.0, k) * (1.0 + m1.mass() + m2.mass());
}

}  // namespace mflow
