#pragma once

#include "measureflow/measure.hpp"
#include "measureflow/transport.hpp"

namespace mflow {

/// Optimal decomposition for the flat (generalized Wasserstein) distance with
/// unit removal cost: distance = removed1 + removed2 + transport_cost.
struct GwSolution {
    double distance = 0.0;
    SignedDecomposition kept1;
    SignedDecomposition kept2;
    /// Coupling of the kept parts; indices refer to the atoms of the inputs.
    TransportPlan plan;
    double transport_cost = 0.0;
};

/// Exact flat distance between measures of arbitrary masses, solved as the
/// partial-transport problem min sum pi_ij (|x_i - y_j| - 2) + |m1| + |m2| with
/// row sums <= weights(m1) and column sums <= weights(m2). Pairs at distance >= 2
/// never carry mass at an optimum and are not generated.
GwSolution generalized_wasserstein(const DiscreteMeasure& m1, const DiscreteMeasure& m2,
                                   const TransportOptions& options = {});

struct DualProbe {
    double value = 0.0;
    /// false when f violates |f| <= 1 or Lip(f) <= 1 on the supports; the value
    /// is then not a lower bound.
    bool admissible = true;
};

/// Integral of f against m1 - m2, a lower bound for the flat distance when
/// |f| <= 1 and Lip(f) <= 1.
DualProbe gw_dual_probe(const DiscreteMeasure& m1, const DiscreteMeasure& m2, const TestFn& f);

/// Checks int f d(m1 - m2) <= max(sup|f|, Lip f) * W^g(m1, m2) within 1e-9, with
/// both constants measured on the supports. A false result indicates a solver bug.
bool integral_bound_check(const TestFn& f, const DiscreteMeasure& m1, const DiscreteMeasure& m2);

}  // namespace mflow
