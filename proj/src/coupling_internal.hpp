#pragma once

#include <cstddef>
#include <vector>

#include "measureflow/measure.hpp"
#include "measureflow/network_simplex.hpp"
#include "measureflow/transport.hpp"

namespace mflow::detail {

struct ResidualAtom {
    std::size_t index;
    double weight;
};

/// Split of two measures into their common part (mass shared at identical
/// positions) and the remaining atoms on each side.
struct CancelledPair {
    std::vector<PlanEntry> common;
    std::vector<ResidualAtom> first;
    std::vector<ResidualAtom> second;
};

CancelledPair cancel_common_mass(const DiscreteMeasure& m1, const DiscreteMeasure& m2);

/// North-west corner coupling of two position-sorted 1D atom lists; optimal for
/// W1 on the line. Stops when either side is exhausted.
std::vector<PlanEntry> monotone_coupling(const std::vector<ResidualAtom>& a, const std::vector<ResidualAtom>& b);

/// Min-cost flow on the line graph through the sorted union of 1D points.
/// With `removal` set, an extra node is joined to every point by arcs of unit
/// cost, turning the problem into the flat (generalized Wasserstein) metric.
struct LineFlow {
    double cost = 0.0;
    std::vector<double> removed_first;   // per residual atom of the first side
    std::vector<double> removed_second;  // per residual atom of the second side
};

LineFlow solve_line_flow(const DiscreteMeasure& m1, const std::vector<ResidualAtom>& a, const DiscreteMeasure& m2,
                         const std::vector<ResidualAtom>& b, bool removal, PivotRule rule);

void sort_and_merge(std::vector<PlanEntry>& entries);

}  // namespace mflow::detail
