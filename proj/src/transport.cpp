#include "measureflow/transport.hpp"

#include <algorithm>
#include <cmath>

#include "coupling_internal.hpp"
#include "measureflow/errors.hpp"

namespace mflow {

std::vector<double> TransportPlan::row_sums(std::size_t sources) const {
    std::vector<double> s(sources, 0.0);
    for (const auto& e : entries) s.at(e.source) += e.flow;
    return s;
}

std::vector<double> TransportPlan::column_sums(std::size_t targets) const {
    std::vector<double> s(targets, 0.0);
    for (const auto& e : entries) s.at(e.target) += e.flow;
    return s;
}

double plan_cost(const TransportPlan& plan, const DiscreteMeasure& from, const DiscreteMeasure& to) {
    double c = 0.0;
    for (const auto& e : plan.entries) c += e.flow * euclidean_distance(from.position(e.source), to.position(e.target));
    return c;
}

void require_equal_mass(const DiscreteMeasure& m1, const DiscreteMeasure& m2) {
    if (m1.dim() != m2.dim()) throw DimensionMismatch("measures live in different dimensions");
    const double a = m1.mass(), b = m2.mass();
    if (std::abs(a - b) > kMassTolerance * std::max({1.0, a, b})) throw MassMismatch(a, b);
}

namespace detail {

CancelledPair cancel_common_mass(const DiscreteMeasure& m1, const DiscreteMeasure& m2) {
    CancelledPair out;
    std::size_t i = 0, j = 0;
    auto lt = [](std::span<const double> a, std::span<const double> b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    };
    while (i < m1.size() || j < m2.size()) {
        if (j == m2.size() || (i < m1.size() && lt(m1.position(i), m2.position(j)))) {
            out.first.push_back({i, m1.weight(i)});
            ++i;
        } else if (i == m1.size() || lt(m2.position(j), m1.position(i))) {
            out.second.push_back({j, m2.weight(j)});
            ++j;
        } else {
            const double a = m1.weight(i), b = m2.weight(j);
            const double c = std::min(a, b);
            out.common.push_back({i, j, c});
            if (a > c) out.first.push_back({i, a - c});
            if (b > c) out.second.push_back({j, b - c});
            ++i;
            ++j;
        }
    }
    return out;
}

std::vector<PlanEntry> monotone_coupling(const std::vector<ResidualAtom>& a, const std::vector<ResidualAtom>& b) {
    std::vector<PlanEntry> entries;
    std::size_t i = 0, j = 0;
    double ra = a.empty() ? 0.0 : a[0].weight;
    double rb = b.empty() ? 0.0 : b[0].weight;
    while (i < a.size() && j < b.size()) {
        const double f = std::min(ra, rb);
        if (f > 0.0) entries.push_back({a[i].index, b[j].index, f});
        // Advance whichever side is exhausted; on a tie both.
        const bool next_a = ra <= rb;
        const bool next_b = rb <= ra;
        ra -= f;
        rb -= f;
        if (next_a && ++i < a.size()) ra = a[i].weight;
        if (next_b && ++j < b.size()) rb = b[j].weight;
    }
    return entries;
}

LineFlow solve_line_flow(const DiscreteMeasure& m1, const std::vector<ResidualAtom>& a, const DiscreteMeasure& m2,
                         const std::vector<ResidualAtom>& b, bool removal, PivotRule rule) {
    struct Node {
        double x;
        std::size_t side;  // 0 first, 1 second
        std::size_t slot;  // index into a or b
    };
    std::vector<Node> nodes;
    nodes.reserve(a.size() + b.size());
    for (std::size_t k = 0; k < a.size(); ++k) nodes.push_back({m1.position(a[k].index)[0], 0, k});
    for (std::size_t k = 0; k < b.size(); ++k) nodes.push_back({m2.position(b[k].index)[0], 1, k});
    std::stable_sort(nodes.begin(), nodes.end(), [](const Node& p, const Node& q) { return p.x < q.x; });

    const std::size_t n = nodes.size();
    const std::size_t trash = n;
    std::vector<FlowArc> arcs;
    std::vector<double> supply(removal ? n + 1 : n, 0.0);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double w = nodes[k].side == 0 ? a[nodes[k].slot].weight : b[nodes[k].slot].weight;
        supply[k] = nodes[k].side == 0 ? w : -w;
        (nodes[k].side == 0 ? s1 : s2) += w;
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double gap = nodes[k + 1].x - nodes[k].x;
        arcs.push_back({k, k + 1, gap});
        arcs.push_back({k + 1, k, gap});
    }
    const std::size_t first_removal = arcs.size();
    if (removal) {
        for (std::size_t k = 0; k < n; ++k) {
            if (nodes[k].side == 0)
                arcs.push_back({k, trash, 1.0});
            else
                arcs.push_back({trash, k, 1.0});
        }
        supply[trash] = s2 - s1;
    }
    const FlowSolution sol = min_cost_flow(supply.size(), arcs, supply, rule);

    LineFlow out;
    out.cost = sol.cost;
    out.removed_first.assign(a.size(), 0.0);
    out.removed_second.assign(b.size(), 0.0);
    if (removal) {
        for (std::size_t k = 0; k < n; ++k) {
            const double f = std::max(0.0, sol.flow[first_removal + k]);
            if (nodes[k].side == 0)
                out.removed_first[nodes[k].slot] = std::min(f, a[nodes[k].slot].weight);
            else
                out.removed_second[nodes[k].slot] = std::min(f, b[nodes[k].slot].weight);
        }
    }
    return out;
}

void sort_and_merge(std::vector<PlanEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const PlanEntry& p, const PlanEntry& q) {
        return p.source != q.source ? p.source < q.source : p.target < q.target;
    });
    std::size_t w = 0;
    for (std::size_t r = 0; r < entries.size(); ++r) {
        if (w > 0 && entries[w - 1].source == entries[r].source && entries[w - 1].target == entries[r].target)
            entries[w - 1].flow += entries[r].flow;
        else
            entries[w++] = entries[r];
    }
    entries.resize(w);
    std::erase_if(entries, [](const PlanEntry& e) { return !(e.flow > 0.0); });
}

}  // namespace detail

W1Result wasserstein1(const DiscreteMeasure& m1, const DiscreteMeasure& m2, const TransportOptions& options) {
    require_equal_mass(m1, m2);
    auto cancelled = detail::cancel_common_mass(m1, m2);
    auto& a = cancelled.first;
    auto& b = cancelled.second;

    W1Result out;
    out.plan.entries = std::move(cancelled.common);
    if (!a.empty() && !b.empty()) {
        if (m1.dim() == 1 && a.size() * b.size() > options.dense_pair_limit) {
            // On the line the monotone (north-west corner) coupling is optimal.
            auto mono = detail::monotone_coupling(a, b);
            out.plan.entries.insert(out.plan.entries.end(), mono.begin(), mono.end());
        } else {
            const std::size_t na = a.size(), nb = b.size();
            std::vector<double> supply(na + nb);
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < na; ++i) s1 += supply[i] = a[i].weight;
            for (std::size_t j = 0; j < nb; ++j) {
                supply[na + j] = -b[j].weight;
                s2 += b[j].weight;
            }
            // Masses agree within tolerance; absorb the rounding gap into the
            // heaviest atom so the network is exactly balanced.
            const double gap = s1 - s2;
            if (gap > 0.0) {
                auto it = std::max_element(supply.begin(), supply.begin() + static_cast<std::ptrdiff_t>(na));
                *it = std::max(0.0, *it - gap);
            } else if (gap < 0.0) {
                auto it = std::min_element(supply.begin() + static_cast<std::ptrdiff_t>(na), supply.end());
                *it = std::min(0.0, *it - gap);
            }
            std::vector<FlowArc> arcs;
            arcs.reserve(na * nb);
            for (std::size_t i = 0; i < na; ++i)
                for (std::size_t j = 0; j < nb; ++j)
                    arcs.push_back({i, na + j, euclidean_distance(m1.position(a[i].index), m2.position(b[j].index))});
            const FlowSolution sol = min_cost_flow(na + nb, arcs, supply, options.pivot, 2.0 * kMassTolerance);
            for (std::size_t e = 0; e < arcs.size(); ++e) {
                if (sol.flow[e] > 0.0)
                    out.plan.entries.push_back({a[arcs[e].source].index, b[arcs[e].target - na].index, sol.flow[e]});
            }
        }
    }
    detail::sort_and_merge(out.plan.entries);
    out.distance = plan_cost(out.plan, m1, m2);
    return out;
}

double wasserstein1_1d(const DiscreteMeasure& m1, const DiscreteMeasure& m2) {
    if (m1.dim() != 1 || m2.dim() != 1) throw DimensionMismatch("wasserstein1_1d requires dimension 1");
    require_equal_mass(m1, m2);
    // Walk the merged breakpoints; between consecutive ones F1 - F2 is constant.
    double f1 = 0.0, f2 = 0.0, total = 0.0, last = 0.0;
    std::size_t i = 0, j = 0;
    bool started = false;
    while (i < m1.size() || j < m2.size()) {
        const double x1 = i < m1.size() ? m1.position(i)[0] : INFINITY;
        const double x2 = j < m2.size() ? m2.position(j)[0] : INFINITY;
        const double x = std::min(x1, x2);
        if (started) total += std::abs(f1 - f2) * (x - last);
        if (x1 == x) f1 += m1.weight(i++);
        if (x2 == x) f2 += m2.weight(j++);
        last = x;
        started = true;
    }
    return total;
}

double support_lipschitz(const DiscreteMeasure& m1, const DiscreteMeasure& m2, const TestFn& f) {
    if (m1.dim() != m2.dim()) throw DimensionMismatch("measures live in different dimensions");
    std::vector<std::span<const double>> pts;
    for (std::size_t i = 0; i < m1.size(); ++i) pts.push_back(m1.position(i));
    for (std::size_t j = 0; j < m2.size(); ++j) pts.push_back(m2.position(j));
    std::vector<double> vals(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) vals[k] = f(pts[k]);
    double lip = 0.0;
    for (std::size_t p = 0; p < pts.size(); ++p) {
        for (std::size_t q = p + 1; q < pts.size(); ++q) {
            const double d = euclidean_distance(pts[p], pts[q]);
            if (d > 0.0) lip = std::max(lip, std::abs(vals[p] - vals[q]) / d);
        }
    }
    return lip;
}

double dual_lower_bound(const DiscreteMeasure& m1, const DiscreteMeasure& m2, const TestFn& f) {
    if (m1.dim() != m2.dim()) throw DimensionMismatch("measures live in different dimensions");
    std::vector<std::span<const double>> pts;
    for (std::size_t i = 0; i < m1.size(); ++i) pts.push_back(m1.position(i));
    for (std::size_t j = 0; j < m2.size(); ++j) pts.push_back(m2.position(j));
    std::vector<double> vals(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) vals[k] = f(pts[k]);
    for (std::size_t p = 0; p < pts.size(); ++p) {
        for (std::size_t q = p + 1; q < pts.size(); ++q) {
            const double d = euclidean_distance(pts[p], pts[q]);
            if (std::abs(vals[p] - vals[q]) > d * (1.0 + 1e-9) + 1e-12)
                throw LipschitzViolation("test function is not 1-Lipschitz on the supports");
        }
    }
    double s = 0.0;
    for (std::size_t i = 0; i < m1.size(); ++i) s += m1.weight(i) * vals[i];
    for (std::size_t j = 0; j < m2.size(); ++j) s -= m2.weight(j) * vals[m1.size() + j];
    return s;
}

}  // namespace mflow
