#pragma once

#include <vector>

#include "measureflow/measure.hpp"
#include "measureflow/transport.hpp"

namespace mflow {

struct FiberOptions {
    /// Base-optimality slack: the second stage admits plans whose base cost is
    /// within eps_rel * (1 + optimum) of the first-stage optimum.
    double eps_rel = 1e-9;
};

struct FiberResult {
    /// Minimal velocity cost sum p |v - w| over base-optimal lifted couplings.
    double value = 0.0;
    /// First-stage optimum: W1 of the base projections for fiber_w, the flat
    /// distance of the base projections for fiber_wg.
    double base_cost = 0.0;
    double slack = 0.0;
    /// Coupling of lifted atoms (indices into V1 and V2).
    TransportPlan plan;
};

/// Velocity-matching cost over lifted couplings whose base marginal is an
/// optimal W1 plan between the base projections. Requires equal masses.
FiberResult fiber_w(const LiftedMeasure& v1, const LiftedMeasure& v2, const FiberOptions& options = {});

/// Velocity-matching cost over sub-measures of V1, V2 and couplings of them whose
/// base decomposition is optimal for the flat distance of the base projections.
/// Masses may differ. Not a distance: it vanishes on some distinct pairs.
FiberResult fiber_wg(const LiftedMeasure& v1, const LiftedMeasure& v2, const FiberOptions& options = {});

/// The quantities entering the lifted-vs-fiber inequalities
///   W(V1, V2)   <= fiber_w(V1, V2)  + W(base1, base2)    (equal masses only)
///   W^g(V1, V2) <= fiber_wg(V1, V2) + W^g(base1, base2)
/// where the lifted measures are compared as measures on R^{2n}.
struct WwReport {
    bool balanced = false;  // masses equal, so the W branch applies
    double lifted_w = 0.0, fiber_w = 0.0, base_w = 0.0;
    double lifted_gw = 0.0, fiber_wg = 0.0, base_gw = 0.0;
    bool w_holds = true;
    bool gw_holds = true;
};

WwReport ww_report(const LiftedMeasure& v1, const LiftedMeasure& v2, double tolerance = 1e-7);

/// True iff both inequalities of ww_report hold within 1e-7 (the W branch only
/// when masses agree). A false result signals a solver bug.
bool check_ww_inequalities(const LiftedMeasure& v1, const LiftedMeasure& v2);

}  // namespace mflow
