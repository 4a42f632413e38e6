#pragma once

#include <cstddef>
#include <vector>

namespace mflow {

/// Directed uncapacitated arc of a min-cost flow network.
struct FlowArc {
    std::size_t source;
    std::size_t target;
    double cost;
};

enum class PivotRule {
    /// First eligible arc in index order.
    bland,
    /// Most negative reduced cost within rotating blocks of ~sqrt(arcs) arcs.
    block_search,
    /// bland for small networks, block_search otherwise.
    automatic,
};

struct FlowSolution {
    double cost = 0.0;
    std::vector<double> flow;  // one entry per input arc
    std::size_t pivots = 0;
};

/// Exact primal network simplex for uncapacitated min-cost flow.
///
/// `supply[v]` is the net outflow required at node v; supplies must sum to zero
/// within `balance_tolerance`. The spanning tree is kept strongly feasible
/// (Cunningham's leaving-arc rule), which rules out cycling for every entering
/// rule; the run is fully deterministic for a given input.
FlowSolution min_cost_flow(std::size_t node_count, const std::vector<FlowArc>& arcs, const std::vector<double>& supply,
                           PivotRule rule = PivotRule::automatic, double balance_tolerance = 1e-9);

}  // namespace mflow
