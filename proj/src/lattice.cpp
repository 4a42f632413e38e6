#include "measureflow/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "measureflow/errors.hpp"

namespace mflow {

namespace {

constexpr double kSnapTol = 1e-6;

using Index = std::vector<std::int64_t>;

std::string describe(std::span<const double> x) {
    std::string s = "(";
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (k) s += ", ";
        s += std::to_string(x[k]);
    }
    return s + ")";
}

Index snap_space(const LatticeGrid& g, std::span<const double> x) {
    Index idx(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (std::abs(x[k]) > g.space_half_width * (1.0 + 1e-12))
            throw SupportOverflow("atom at " + describe(x) + " lies outside the space extent [-" +
                                  std::to_string(g.space_half_width) + ", " + std::to_string(g.space_half_width) + "]");
        idx[k] = g.space_index(x[k]);
    }
    return idx;
}

Index snap_velocity(const LatticeGrid& g, std::span<const double> v) {
    Index idx(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (std::abs(v[k]) > g.velocity_half_width * (1.0 + 1e-12))
            throw SupportOverflow("velocity " + describe(v) + " lies outside the velocity extent [-" +
                                  std::to_string(g.velocity_half_width) + ", " +
                                  std::to_string(g.velocity_half_width) + "]");
        idx[k] = g.velocity_index(v[k]);
    }
    return idx;
}

void check_space_index(const LatticeGrid& g, const Index& idx) {
    for (auto i : idx) {
        if (std::abs(g.space_point(i)) > g.space_half_width * (1.0 + 1e-12)) {
            std::vector<double> x;
            for (auto c : idx) x.push_back(g.space_point(c));
            throw SupportOverflow("atom moved to " + describe(x) + ", outside the space extent");
        }
    }
}

DiscreteMeasure to_measure(const LatticeGrid& g, const std::map<Index, double>& units, double quantum) {
    std::vector<double> pos, w;
    pos.reserve(units.size() * g.dim);
    w.reserve(units.size());
    for (const auto& [idx, u] : units) {
        if (!(u > 0.0)) continue;
        for (auto i : idx) pos.push_back(g.space_point(i));
        w.push_back(u * quantum);
    }
    return DiscreteMeasure(g.dim, pos, w, MergePolicy{-1, 0.0});
}

/// Finest power of two dividing w.
double granularity(double w) {
    int e = 0;
    const double mant = std::frexp(w, &e);
    const auto bits = static_cast<std::uint64_t>(std::ldexp(mant, 53));
    return std::ldexp(1.0, e - 53 + std::countr_zero(bits));
}

double resolve_quantum(const LatticeGrid& g, const DiscreteMeasure& mu, const std::optional<SourceSpec>& src,
                       double quantum) {
    if (quantum > 0.0) return quantum;
    double bound = mu.mass();
    if (src) bound += g.time_step() * evaluate_source(*src, mu).mass();
    double q = mass_quantum(4.0 * std::max(bound, 1e-300));
    for (double w : mu.weights()) q = std::min(q, granularity(w));
    return q;
}

struct Piece {
    Index base;
    Index velocity;
    double units;
};

/// Quantized lift of mu with integer masses (in units of the quantum) that
/// reproduce each base atom's mass exactly.
std::vector<Piece> quantized_lift(const LatticeGrid& g, const DiscreteMeasure& mu, const std::optional<PvfSpec>& pvf,
                                  double quantum) {
    std::map<Index, double> base_units;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double u = mu.weight(i) / quantum;
        if (u != std::floor(u)) throw std::invalid_argument("atom weights are not multiples of the mass quantum");
        base_units[snap_space(g, mu.position(i))] += u;
    }
    std::vector<Piece> pieces;
    if (!pvf) {
        for (const auto& [b, u] : base_units) pieces.push_back({b, Index(g.dim, 0), u});
        return pieces;
    }

    const LiftedMeasure v = evaluate_pvf(*pvf, mu);
    struct Raw {
        Index velocity;
        double weight;
    };
    std::map<Index, std::vector<Raw>> groups;
    for (std::size_t a = 0; a < v.size(); ++a)
        groups[snap_space(g, v.base(a))].push_back({snap_velocity(g, v.velocity(a)), v.weight(a)});

    for (const auto& [b, total_units] : base_units) {
        const auto it = groups.find(b);
        if (it == groups.end()) throw SolverError("field output does not project onto its input measure");
        const auto& raw = it->second;
        std::vector<double> w(raw.size());
        for (std::size_t k = 0; k < raw.size(); ++k) w[k] = raw[k].weight;
        const double wsum = exact_sum(w);
        if (std::abs(wsum - total_units * quantum) > 1e-9 * std::max(1.0, wsum))
            throw SolverError("field output does not project onto its input measure");
        // Largest-remainder apportionment of the base atom's units.
        std::vector<double> share(raw.size()), assigned(raw.size());
        double used = 0.0;
        for (std::size_t k = 0; k < raw.size(); ++k) {
            share[k] = total_units * (w[k] / wsum);
            assigned[k] = std::floor(share[k]);
            used += assigned[k];
        }
        std::vector<std::size_t> order(raw.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
            return share[p] - assigned[p] > share[q] - assigned[q];
        });
        for (std::size_t r = 0; used < total_units; r = (r + 1) % order.size()) {
            assigned[order[r]] += 1.0;
            used += 1.0;
        }
        for (std::size_t r = order.size(); used > total_units; r = r == 0 ? order.size() : r) {
            --r;
            if (assigned[order[r]] >= 1.0) {
                assigned[order[r]] -= 1.0;
                used -= 1.0;
            }
        }
        for (std::size_t k = 0; k < raw.size(); ++k)
            if (assigned[k] > 0.0) pieces.push_back({b, raw[k].velocity, assigned[k]});
    }
    return pieces;
}

}  // namespace

LatticeGrid LatticeGrid::standard(int N, std::size_t dim) {
    return with_extent(N, dim, static_cast<double>(N), static_cast<double>(N));
}

LatticeGrid LatticeGrid::with_extent(int N, std::size_t dim, double space_half_width, double velocity_half_width) {
    if (N < 1) throw ConfigError("lattice level N must be a positive integer");
    if (dim < 1) throw ConfigError("dimension must be positive");
    if (!(space_half_width > 0.0) || !(velocity_half_width > 0.0)) throw ConfigError("extent must be positive");
    LatticeGrid g;
    g.N = N;
    g.dim = dim;
    g.space_half_width = space_half_width;
    g.velocity_half_width = velocity_half_width;
    return g;
}

std::int64_t LatticeGrid::space_index(double x) const {
    return static_cast<std::int64_t>(std::floor(x * (static_cast<double>(N) * N) + kSnapTol));
}

std::int64_t LatticeGrid::velocity_index(double v) const {
    return static_cast<std::int64_t>(std::floor(v * N + kSnapTol));
}

double LatticeGrid::space_point(std::int64_t i) const {
    return static_cast<double>(i) / (static_cast<double>(N) * N);
}

double LatticeGrid::velocity_point(std::int64_t j) const { return static_cast<double>(j) / N; }

DiscreteMeasure ax_discretize(const LatticeGrid& grid, const DiscreteMeasure& mu) {
    if (mu.dim() != grid.dim) throw DimensionMismatch("measure and grid dimensions differ");
    std::vector<double> pos, w;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (auto c : snap_space(grid, mu.position(i))) pos.push_back(grid.space_point(c));
        w.push_back(mu.weight(i));
    }
    return DiscreteMeasure(grid.dim, pos, w, MergePolicy{-1, 0.0});
}

LiftedMeasure av_discretize(const LatticeGrid& grid, const LiftedMeasure& v) {
    if (v.dim() != grid.dim) throw DimensionMismatch("measure and grid dimensions differ");
    std::vector<double> xs, vs, w;
    for (std::size_t a = 0; a < v.size(); ++a) {
        for (auto c : snap_space(grid, v.base(a))) xs.push_back(grid.space_point(c));
        for (auto c : snap_velocity(grid, v.velocity(a))) vs.push_back(grid.velocity_point(c));
        w.push_back(v.weight(a));
    }
    return LiftedMeasure(grid.dim, xs, vs, w, MergePolicy{-1, 0.0});
}

double mass_quantum(double mass_bound) {
    if (!(mass_bound > 0.0) || !std::isfinite(mass_bound)) throw std::invalid_argument("mass bound must be positive");
    int e = 0;
    std::frexp(mass_bound, &e);  // mass_bound < 2^e
    return std::ldexp(1.0, e - 52);
}

DiscreteMeasure las_step(const LatticeGrid& grid, const DiscreteMeasure& mu, const std::optional<PvfSpec>& pvf,
                         const std::optional<SourceSpec>& src, double quantum) {
    if (mu.dim() != grid.dim) throw DimensionMismatch("measure and grid dimensions differ");
    const double q = resolve_quantum(grid, mu, src, quantum);
    std::map<Index, double> next;
    for (const auto& p : quantized_lift(grid, mu, pvf, q)) {
        // x_i + dt v_j = (i + j) / N^2, so the target is again a lattice point.
        Index target(grid.dim);
        for (std::size_t k = 0; k < grid.dim; ++k) target[k] = p.base[k] + p.velocity[k];
        check_space_index(grid, target);
        next[target] += p.units;
    }
    if (src) {
        const double dt = grid.time_step();
        const DiscreteMeasure s = evaluate_source(*src, mu);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double u = std::round(dt * s.weight(i) / q);
            if (u > 0.0) next[snap_space(grid, s.position(i))] += u;
        }
    }
    DiscreteMeasure out = to_measure(grid, next, q);
    // Grid alignment closure: every atom must re-snap onto itself.
    for (std::size_t i = 0; i < out.size(); ++i)
        for (double x : out.position(i))
            if (grid.space_point(grid.space_index(x)) != x) throw SolverError("scheme left the space lattice");
    return out;
}

DiscreteMeasure interpolate(const LatticeGrid& grid, const DiscreteMeasure& mu, const std::optional<PvfSpec>& pvf,
                            const std::optional<SourceSpec>& src, double tau, double quantum) {
    if (mu.dim() != grid.dim) throw DimensionMismatch("measure and grid dimensions differ");
    if (!(tau >= 0.0) || tau > grid.time_step() * (1.0 + 1e-12))
        throw std::out_of_range("interpolation time must lie in [0, dt]");
    const double q = resolve_quantum(grid, mu, src, quantum);
    std::vector<double> pos, w;
    for (const auto& p : quantized_lift(grid, mu, pvf, q)) {
        for (std::size_t k = 0; k < grid.dim; ++k)
            pos.push_back(grid.space_point(p.base[k]) + tau * grid.velocity_point(p.velocity[k]));
        w.push_back(p.units * q);
    }
    if (src) {
        const DiscreteMeasure s = evaluate_source(*src, mu);
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (auto c : snap_space(grid, s.position(i))) pos.push_back(grid.space_point(c));
            w.push_back(tau * s.weight(i));
        }
    }
    return DiscreteMeasure(grid.dim, pos, w, MergePolicy{MergePolicy{}.digits, 0.0});
}

long step_count(const LatticeGrid& grid, double T) {
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("final time T must be positive");
    return static_cast<long>(std::ceil(T * grid.N * (1.0 - 1e-12)));
}

double growth_envelope(const LatticeGrid& grid, const DiscreteMeasure& mu0, const std::optional<PvfSpec>& pvf,
                       const std::optional<SourceSpec>& src, long steps) {
    const double snap = std::sqrt(static_cast<double>(grid.dim)) * grid.space_step();
    double r0 = mu0.support_radius() + snap;
    if (src) r0 = std::max(r0, src->support_radius + snap);
    if (!pvf) return r0;
    // Velocity snapping moves each velocity by at most sqrt(n)/N.
    const double c = pvf->growth_constant + std::sqrt(static_cast<double>(grid.dim)) * grid.velocity_step();
    return (1.0 + r0) * std::pow(1.0 + c * grid.time_step(), static_cast<double>(steps)) - 1.0;
}

LatticeGrid adaptive_grid(int N, const DiscreteMeasure& mu0, const std::optional<PvfSpec>& pvf,
                          const std::optional<SourceSpec>& src, double T) {
    LatticeGrid g = LatticeGrid::standard(N, mu0.dim());
    const double e = growth_envelope(g, mu0, pvf, src, step_count(g, T));
    const double c = pvf ? pvf->growth_constant : 0.0;
    g.space_half_width = e + 2.0 * g.space_step();
    g.velocity_half_width = c * (1.0 + e) + 2.0 * g.velocity_step();
    return g;
}

DiscreteMeasure Trajectory::state_at(double t) const {
    const double T = final_time();
    if (t < 0.0 || t > T * (1.0 + 1e-12)) throw std::out_of_range("time outside the trajectory span");
    for (std::size_t k = 0; k < times.size(); ++k)
        if (std::abs(times[k] - t) <= 1e-12 * std::max(1.0, T)) return states[k];
    const double dt = grid.time_step();
    auto k = static_cast<std::size_t>(std::floor(t / dt));
    k = std::min(k, states.size() - 2);
    return interpolate(grid, states[k], pvf, src, t - times[k], quantum);
}

Trajectory run_semigroup(const LatticeGrid& grid, const DiscreteMeasure& mu0, const std::optional<PvfSpec>& pvf,
                         const std::optional<SourceSpec>& src, double T, const RunOptions& options) {
    if (mu0.dim() != grid.dim) throw DimensionMismatch("initial measure and grid dimensions differ");
    const long steps = step_count(grid, T);
    if (options.precheck) {
        const double e = growth_envelope(grid, mu0, pvf, src, steps);
        if (e > grid.space_half_width)
            throw SupportOverflow("growth envelope " + std::to_string(e) + " exceeds the space extent " +
                                  std::to_string(grid.space_half_width));
        if (pvf) {
            const double vmax = pvf->growth_constant * (1.0 + e) + grid.velocity_step();
            if (vmax > grid.velocity_half_width)
                throw SupportOverflow("velocity envelope " + std::to_string(vmax) + " exceeds the velocity extent " +
                                      std::to_string(grid.velocity_half_width));
        }
    }

    Trajectory traj;
    traj.grid = grid;
    traj.pvf = pvf;
    traj.src = src;
    double bound = mu0.mass();
    if (src) {
        bound += T * evaluate_source(*src, mu0).mass();
        bound *= std::exp(std::min(src->lipschitz_constant * T, 600.0));
    }
    traj.quantum = mass_quantum(4.0 * std::max(bound, 1e-300));

    // Initial state: A_x(mu0) with weights rounded to multiples of the quantum.
    const DiscreteMeasure snapped = ax_discretize(grid, mu0);
    std::vector<double> w(snapped.weights());
    for (auto& x : w) x = std::round(x / traj.quantum) * traj.quantum;
    DiscreteMeasure state(grid.dim, snapped.positions(), w, MergePolicy{-1, 0.0});

    const double dt = grid.time_step();
    const bool exact_end = std::abs(static_cast<double>(steps) * dt - T) <= 1e-12 * T;
    auto record = [&](double t, DiscreteMeasure m) {
        traj.times.push_back(t);
        traj.masses.push_back(m.mass());
        traj.radii.push_back(m.support_radius());
        traj.states.push_back(std::move(m));
    };
    record(0.0, state);
    for (long k = 0; k < steps; ++k) {
        try {
            if (k + 1 == steps && !exact_end) {
                record(T, interpolate(grid, state, pvf, src, T - static_cast<double>(k) / grid.N, traj.quantum));
            } else {
                state = las_step(grid, state, pvf, src, traj.quantum);
                record(static_cast<double>(k + 1) / grid.N, state);
            }
        } catch (const SupportOverflow& e) {
            throw SupportOverflow(std::string(e.what()) + " at step " + std::to_string(k + 1), k + 1);
        }
    }
    return traj;
}

}  // namespace mflow
