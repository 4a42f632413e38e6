#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "measureflow/measure.hpp"
#include "measureflow/network_simplex.hpp"

namespace mflow {

/// Masses count as equal when they differ by at most this, relative to max(1, mass).
inline constexpr double kMassTolerance = 1e-9;

struct PlanEntry {
    std::size_t source;  // atom index in the first measure
    std::size_t target;  // atom index in the second measure
    double flow;
};

/// Sparse coupling between the atoms of two measures, sorted by (source, target).
struct TransportPlan {
    std::vector<PlanEntry> entries;

    std::vector<double> row_sums(std::size_t sources) const;
    std::vector<double> column_sums(std::size_t targets) const;
};

double plan_cost(const TransportPlan& plan, const DiscreteMeasure& from, const DiscreteMeasure& to);

struct TransportOptions {
    PivotRule pivot = PivotRule::automatic;
    /// One-dimensional instances with more candidate pairs than this are solved
    /// on the line graph (adjacent points only) instead of the complete bipartite graph.
    std::size_t dense_pair_limit = 40000;
};

struct W1Result {
    double distance = 0.0;
    TransportPlan plan;
};

/// Exact 1-Wasserstein distance min sum pi_ij |x_i - y_j| over couplings with
/// exact marginals (unnormalized total-cost convention), with an optimal plan.
/// Throws MassMismatch when the masses differ beyond kMassTolerance.
W1Result wasserstein1(const DiscreteMeasure& m1, const DiscreteMeasure& m2, const TransportOptions& options = {});

/// Closed form for dimension 1: the integral of |F1 - F2| over the line.
double wasserstein1_1d(const DiscreteMeasure& m1, const DiscreteMeasure& m2);

using TestFn = std::function<double(std::span<const double>)>;

/// Integral of f against m1 - m2, a Kantorovich lower bound for W1 when f is
/// 1-Lipschitz. Throws LipschitzViolation if f is not 1-Lipschitz on the union
/// of both supports.
double dual_lower_bound(const DiscreteMeasure& m1, const DiscreteMeasure& m2, const TestFn& f);

/// Largest |f(x) - f(y)| / |x - y| over pairs of support points of m1 + m2.
double support_lipschitz(const DiscreteMeasure& m1, const DiscreteMeasure& m2, const TestFn& f);

void require_equal_mass(const DiscreteMeasure& m1, const DiscreteMeasure& m2);

}  // namespace mflow
