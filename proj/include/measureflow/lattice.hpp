#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "measureflow/fields.hpp"
#include "measureflow/measure.hpp"

namespace mflow {

/// Nested space/velocity lattices of refinement level N: time step 1/N,
/// velocity step 1/N, space step 1/N^2. Cells are half-open and anchored at
/// their lower-left corner; they are never materialized, points are snapped
/// arithmetically.
struct LatticeGrid {
    int N = 1;
    std::size_t dim = 1;
    /// Admissible points satisfy |x_k| <= space_half_width coordinatewise, and
    /// velocities |v_k| <= velocity_half_width.
    double space_half_width = 1.0;
    double velocity_half_width = 1.0;

    /// The box [-N, N]^n for both positions and velocities.
    static LatticeGrid standard(int N, std::size_t dim);
    static LatticeGrid with_extent(int N, std::size_t dim, double space_half_width, double velocity_half_width);

    double time_step() const { return 1.0 / N; }
    double velocity_step() const { return 1.0 / N; }
    double space_step() const { return 1.0 / (static_cast<double>(N) * N); }

    /// Cell index of a coordinate; points within 1e-6 of a cell width below a
    /// cell boundary are taken to lie on it, absorbing rounding in x * N^2.
    std::int64_t space_index(double x) const;
    std::int64_t velocity_index(double v) const;
    double space_point(std::int64_t i) const;
    double velocity_point(std::int64_t j) const;
};

/// Snaps each atom to the anchor of its space cell. Throws SupportOverflow when
/// an atom lies outside the extent.
DiscreteMeasure ax_discretize(const LatticeGrid& grid, const DiscreteMeasure& mu);

/// Snaps bases to space cells and velocities to velocity cells.
LiftedMeasure av_discretize(const LatticeGrid& grid, const LiftedMeasure& v);

/// Largest power of two q such that a total mass up to `mass_bound` is an
/// integer multiple of q below 2^52, so sums of multiples of q are exact.
double mass_quantum(double mass_bound);

/// One explicit Euler step of the lattice scheme:
///   sum_{ij} m_ij delta_{x_i + dt v_j} + dt * A_x(s[mu]),
/// where m_ij are the cell masses of the quantized lift of mu. A null field
/// leaves the transported part equal to mu; a null source adds nothing.
/// Weights are handled as integer multiples of `quantum` (0 picks the finest
/// power of two dividing all weights); the lift's masses are apportioned per
/// base atom so that every base atom's mass is reproduced exactly.
DiscreteMeasure las_step(const LatticeGrid& grid, const DiscreteMeasure& mu, const std::optional<PvfSpec>& pvf,
                         const std::optional<SourceSpec>& src, double quantum = 0.0);

/// The scheme at the intermediate time tau in [0, dt]; at tau = dt it equals las_step.
DiscreteMeasure interpolate(const LatticeGrid& grid, const DiscreteMeasure& mu, const std::optional<PvfSpec>& pvf,
                            const std::optional<SourceSpec>& src, double tau, double quantum = 0.0);

/// Radius bound for the scheme after `steps` steps: the discrete growth
/// estimate (1 + R0)(1 + C' dt)^steps - 1 with C' = C + sqrt(n)/N, where R0
/// covers the snapped initial support and the source support.
double growth_envelope(const LatticeGrid& grid, const DiscreteMeasure& mu0, const std::optional<PvfSpec>& pvf,
                       const std::optional<SourceSpec>& src, long steps);

/// Number of steps ceil(T / dt) (with a relative slack of 1e-12).
long step_count(const LatticeGrid& grid, double T);

struct Trajectory {
    LatticeGrid grid;
    /// 0, dt, ..., (K-1) dt, then T (interpolated when T is not a multiple of dt).
    std::vector<double> times;
    std::vector<DiscreteMeasure> states;
    std::vector<double> masses;
    std::vector<double> radii;
    std::optional<PvfSpec> pvf;
    std::optional<SourceSpec> src;
    double quantum = 0.0;

    double final_time() const { return times.back(); }
    /// State at any t in [0, T], interpolated within a step on demand.
    DiscreteMeasure state_at(double t) const;
};

struct RunOptions {
    /// Reject upfront when the growth envelope leaves the extent.
    bool precheck = true;
};

/// Runs the scheme from A_x(mu0) up to time T. Throws SupportOverflow (with the
/// step index) if an atom or velocity leaves the extent, and upfront when the
/// growth envelope does.
Trajectory run_semigroup(const LatticeGrid& grid, const DiscreteMeasure& mu0, const std::optional<PvfSpec>& pvf,
                         const std::optional<SourceSpec>& src, double T, const RunOptions& options = {});

/// Grid whose extent is the bounding box of the growth envelope over [0, T].
LatticeGrid adaptive_grid(int N, const DiscreteMeasure& mu0, const std::optional<PvfSpec>& pvf,
                          const std::optional<SourceSpec>& src, double T);

}  // namespace mflow
