#include "measureflow/network_simplex.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

#include "measureflow/errors.hpp"

namespace mflow {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kBlandArcLimit = 4096;

class Solver {
public:
    Solver(std::size_t n, const std::vector<FlowArc>& arcs, const std::vector<double>& supply)
        : n_(n), m_(arcs.size()), root_(n) {
        const std::size_t total = m_ + n_;
        source_.resize(total);
        target_.resize(total);
        cost_.resize(total);
        flow_.assign(total, 0.0);
        double max_cost = 0.0;
        for (std::size_t e = 0; e < m_; ++e) {
            if (arcs[e].source >= n || arcs[e].target >= n) throw std::out_of_range("arc endpoint out of range");
            if (!std::isfinite(arcs[e].cost)) throw std::invalid_argument("arc cost must be finite");
            source_[e] = arcs[e].source;
            target_[e] = arcs[e].target;
            cost_[e] = arcs[e].cost;
            max_cost = std::max(max_cost, std::abs(arcs[e].cost));
        }
        // Any simple path costs less than this, so artificial arcs carry flow
        // at optimum only when the network is infeasible.
        art_cost_ = (static_cast<double>(n_) + 1.0) * (max_cost + 1.0);
        eps_ = 64.0 * DBL_EPSILON * art_cost_;

        parent_.assign(n_ + 1, kNone);
        pred_.assign(n_ + 1, kNone);
        up_.assign(n_ + 1, false);
        depth_.assign(n_ + 1, 0);
        pi_.assign(n_ + 1, 0.0);
        first_child_.assign(n_ + 1, kNone);
        next_sibling_.assign(n_ + 1, kNone);
        prev_sibling_.assign(n_ + 1, kNone);
        in_tree_.assign(total, false);

        for (std::size_t v = 0; v < n_; ++v) {
            const std::size_t e = m_ + v;
            cost_[e] = art_cost_;
            // Zero-supply nodes point toward the root, keeping the tree strongly feasible.
            if (supply[v] >= 0.0) {
                source_[e] = v;
                target_[e] = root_;
                flow_[e] = supply[v];
                up_[v] = true;
                pi_[v] = -art_cost_;
            } else {
                source_[e] = root_;
                target_[e] = v;
                flow_[e] = -supply[v];
                up_[v] = false;
                pi_[v] = art_cost_;
            }
            parent_[v] = root_;
            pred_[v] = e;
            depth_[v] = 1;
            in_tree_[e] = true;
            link_child(root_, v);
        }
    }

    FlowSolution run(PivotRule rule) {
        if (rule == PivotRule::automatic) rule = m_ + n_ <= kBlandArcLimit ? PivotRule::bland : PivotRule::block_search;
        block_ = std::max<std::size_t>(10, static_cast<std::size_t>(std::sqrt(static_cast<double>(m_ + n_))));
        std::size_t pivots = 0;
        const std::size_t limit = 50 * (m_ + n_) * (n_ + 1) + 1000;
        for (;;) {
            const std::size_t e = rule == PivotRule::bland ? find_bland() : find_block();
            if (e == kNone) break;
            pivot(e);
            if (++pivots > limit) throw SolverError("network simplex exceeded its pivot budget");
        }
        FlowSolution out;
        out.pivots = pivots;
        for (std::size_t v = 0; v < n_; ++v) {
            if (flow_[m_ + v] > 1e-9 * (1.0 + total_supply_scale_))
                throw SolverError("min-cost flow is infeasible for the given network");
        }
        out.flow.assign(flow_.begin(), flow_.begin() + static_cast<std::ptrdiff_t>(m_));
        for (std::size_t e = 0; e < m_; ++e) out.cost += out.flow[e] * cost_[e];
        return out;
    }

    double total_supply_scale_ = 0.0;

private:
    double reduced(std::size_t e) const { return cost_[e] + pi_[source_[e]] - pi_[target_[e]]; }

    std::size_t find_bland() const {
        for (std::size_t e = 0; e < m_ + n_; ++e)
            if (!in_tree_[e] && reduced(e) < -eps_) return e;
        return kNone;
    }

    std::size_t find_block() {
        const std::size_t total = m_ + n_;
        double best = -eps_;
        std::size_t chosen = kNone;
        std::size_t scanned = 0;
        std::size_t e = next_arc_;
        for (std::size_t k = 0; k < total; ++k) {
            if (!in_tree_[e]) {
                const double r = reduced(e);
                if (r < best) {
                    best = r;
                    chosen = e;
                }
            }
            e = e + 1 == total ? 0 : e + 1;
            if (++scanned == block_) {
                if (chosen != kNone) break;
                scanned = 0;
            }
        }
        next_arc_ = e;
        return chosen;
    }

    void link_child(std::size_t p, std::size_t c) {
        next_sibling_[c] = first_child_[p];
        prev_sibling_[c] = kNone;
        if (first_child_[p] != kNone) prev_sibling_[first_child_[p]] = c;
        first_child_[p] = c;
    }

    void unlink_child(std::size_t p, std::size_t c) {
        if (prev_sibling_[c] != kNone)
            next_sibling_[prev_sibling_[c]] = next_sibling_[c];
        else
            first_child_[p] = next_sibling_[c];
        if (next_sibling_[c] != kNone) prev_sibling_[next_sibling_[c]] = prev_sibling_[c];
        next_sibling_[c] = prev_sibling_[c] = kNone;
    }

    void pivot(std::size_t e_in) {
        const std::size_t first = source_[e_in];
        const std::size_t second = target_[e_in];

        std::size_t a = first, b = second;
        while (a != b) {
            if (depth_[a] >= depth_[b])
                a = parent_[a];
            else
                b = parent_[b];
        }
        const std::size_t join = a;

        // Flow travels join -> first along the tree, then first -> second on
        // e_in, then second -> join. The last blocking arc in that order leaves.
        constexpr double inf = std::numeric_limits<double>::infinity();
        double delta = inf;
        std::size_t u_out = kNone;
        int side = 0;
        for (std::size_t w = first; w != join; w = parent_[w]) {
            const double d = up_[w] ? flow_[pred_[w]] : inf;
            if (d < delta) {
                delta = d;
                u_out = w;
                side = 1;
            }
        }
        for (std::size_t w = second; w != join; w = parent_[w]) {
            const double d = up_[w] ? inf : flow_[pred_[w]];
            if (d <= delta) {
                delta = d;
                u_out = w;
                side = 2;
            }
        }
        if (u_out == kNone) throw SolverError("min-cost flow is unbounded");

        if (delta > 0.0) {
            for (std::size_t w = first; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? -delta : delta;
            for (std::size_t w = second; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? delta : -delta;
            flow_[e_in] += delta;
        }
        const std::size_t e_out = pred_[u_out];
        flow_[e_out] = 0.0;

        // Re-hang the subtree rooted at u_out from the endpoint of e_in it contains.
        const std::size_t u_in = side == 1 ? first : second;
        const std::size_t v_in = side == 1 ? second : first;

        std::vector<std::size_t>& path = path_;
        path.clear();
        for (std::size_t w = u_in;; w = parent_[w]) {
            path.push_back(w);
            if (w == u_out) break;
        }
        std::vector<std::size_t>& old_pred = old_pred_;
        std::vector<char>& old_up = old_up_;
        old_pred.resize(path.size());
        old_up.resize(path.size());
        for (std::size_t k = 0; k < path.size(); ++k) {
            old_pred[k] = pred_[path[k]];
            old_up[k] = up_[path[k]];
        }
        unlink_child(parent_[u_out], u_out);
        for (std::size_t k = 0; k + 1 < path.size(); ++k) unlink_child(path[k + 1], path[k]);

        parent_[u_in] = v_in;
        pred_[u_in] = e_in;
        up_[u_in] = source_[e_in] == u_in;
        link_child(v_in, u_in);
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
            const std::size_t child = path[k + 1];
            parent_[child] = path[k];
            pred_[child] = old_pred[k];
            up_[child] = !old_up[k];
            link_child(path[k], child);
        }
        in_tree_[e_out] = false;
        in_tree_[e_in] = true;

        // Refresh depth and potentials of the moved subtree.
        std::vector<std::size_t>& stack = stack_;
        stack.clear();
        stack.push_back(u_in);
        while (!stack.empty()) {
            const std::size_t w = stack.back();
            stack.pop_back();
            const std::size_t p = parent_[w];
            depth_[w] = depth_[p] + 1;
            pi_[w] = up_[w] ? pi_[p] - cost_[pred_[w]] : pi_[p] + cost_[pred_[w]];
            for (std::size_t c = first_child_[w]; c != kNone; c = next_sibling_[c]) stack.push_back(c);
        }
    }

    std::size_t n_, m_, root_;
    double art_cost_ = 0.0;
    double eps_ = 0.0;
    std::size_t block_ = 10;
    std::size_t next_arc_ = 0;
    std::vector<std::size_t> source_, target_;
    std::vector<double> cost_, flow_;
    std::vector<std::size_t> parent_, pred_, depth_;
    std::vector<bool> up_;
    std::vector<double> pi_;
    std::vector<std::size_t> first_child_, next_sibling_, prev_sibling_;
    std::vector<bool> in_tree_;
    std::vector<std::size_t> path_, old_pred_, stack_;
    std::vector<char> old_up_;
};

}  // namespace

FlowSolution min_cost_flow(std::size_t node_count, const std::vector<FlowArc>& arcs, const std::vector<double>& supply,
                           PivotRule rule, double balance_tolerance) {
    if (supply.size() != node_count) throw std::invalid_argument("supply vector size must equal node count");
    double balance = 0.0, scale = 0.0;
    for (double s : supply) {
        if (!std::isfinite(s)) throw std::invalid_argument("supplies must be finite");
        balance += s;
        scale += std::abs(s);
    }
    if (std::abs(balance) > balance_tolerance * std::max(1.0, scale))
        throw std::invalid_argument("node supplies do not balance");
    Solver solver(node_count, arcs, supply);
    solver.total_supply_scale_ = scale;
    return solver.run(rule);
}

}  // namespace mflow
