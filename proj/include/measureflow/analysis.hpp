#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "measureflow/fields.hpp"
#include "measureflow/lattice.hpp"
#include "measureflow/measure.hpp"

namespace mflow {

/// Smooth compactly supported test function with its gradient and sup bounds
/// over its support ball.
struct TestFunction {
    std::string label;
    std::function<double(std::span<const double>)> value;
    std::function<Point(std::span<const double>)> gradient;
    Point center;
    double radius = 1.0;
    double sup_norm = 0.0;  // sup |f|
    double c1_norm = 0.0;   // max(sup |f|, sup |grad f|)

    double operator()(std::span<const double> x) const { return value(x); }

    /// exp(1 - 1 / (1 - |x - c|^2 / r^2)) inside the ball, 0 outside; peak 1 at c.
    static TestFunction bump(const Point& center, double radius);
    /// 1 on B(c, inner), smooth transition to 0 at |x - c| = outer.
    static TestFunction plateau(const Point& center, double inner, double outer);
    /// (a . (x - c) + b) times plateau(c, inner, outer).
    static TestFunction windowed_linear(const Point& center, double inner, double outer, const Point& a, double b = 0.0);
};

/// Largest relative deviation between the gradient and central differences
/// at `samples` random points of the support ball (fixed seed).
double gradient_consistency(const TestFunction& f, std::size_t samples = 64, unsigned seed = 1);

/// |(int f dmu(t+h) - int f dmu(t)) / h - int grad f . v dV[mu(t)] - int f ds[mu(t)]|
/// along the trajectory, with the field and source stored in it.
double weak_residual(const Trajectory& traj, const TestFunction& f, double t, double h);

enum class ExtentMode { standard, adaptive, fixed };

/// A named initial-value problem for the scheme, optionally with the exact
/// solution for error measurements.
struct Problem {
    std::string name;
    std::size_t dim = 1;
    DiscreteMeasure initial{1};
    std::optional<PvfSpec> pvf;
    std::optional<SourceSpec> src;
    double T = 1.0;
    std::function<DiscreteMeasure(double)> reference;
    ExtentMode extent = ExtentMode::standard;
    double fixed_half_width = 0.0;  // for ExtentMode::fixed (space and velocity)

    LatticeGrid grid(int N) const;
    Trajectory run(int N) const;
};

/// Built-in problems: "translate" (v = 1 from delta_0), "diffusion1d"
/// (phi(s) = s - 1/2 from delta_0), "source_only" (constant grid-aligned
/// source, no field), "expansion" (v(x) = x from delta_1).
Problem preset_problem(const std::string& name);
std::vector<std::string> preset_names();

enum class Metric { w1, gw };
Metric parse_metric(const std::string& s);
std::string metric_name(Metric m);
/// W1 requires equal masses; W^g does not.
double measure_distance(const DiscreteMeasure& a, const DiscreteMeasure& b, Metric m);

struct LevelResult {
    int N = 0;
    bool overflow = false;
    std::string note;
    std::size_t steps = 0;
    double final_mass = 0.0;
    std::size_t final_atoms = 0;
    /// sup over recorded times of the distance to the closed-form solution (if any).
    std::optional<double> reference_error;
    /// sup over shared times of the distance to the next finer level (if any).
    std::optional<double> successive_distance;
    std::optional<int> next_N;
};

struct ConvergenceReport {
    std::string problem;
    std::string metric;
    std::vector<int> levels;
    std::vector<LevelResult> results;
    /// "reference" when fitted against the closed-form solution, "successive" otherwise.
    std::string rate_basis;
    /// Least-squares slope of -log(distance) against log N.
    double rate = 0.0;
    /// All fitted distances are at rounding level: the scheme is exact and the rate is unbounded.
    bool exact = false;
    std::size_t fitted_points = 0;
};

/// Runs every level (in parallel over `threads`), measures distances between
/// consecutive levels at the coarser level's recorded times and, when the
/// problem has a reference, to the reference. Levels whose run overflows are
/// excluded from the fit. Requires at least three levels.
ConvergenceReport convergence_study(const Problem& problem, const std::vector<int>& levels, Metric metric,
                                    unsigned threads = 1);

/// Slope of -log d against log N; `exact` when every d is below 1e-14.
void fit_rate(const std::vector<double>& N, const std::vector<double>& d, double& rate, bool& exact,
              std::size_t& points);

struct SemigroupRow {
    std::size_t pair = 0;
    double t = 0.0;
    double initial_distance = 0.0;
    double distance = 0.0;
    /// distance / initial_distance (1 when both vanish).
    double ratio = 1.0;
    /// log(ratio) / t, the Lipschitz exponent implied by this row (t > 0).
    double implied_C = 0.0;
    /// W^g(S_t mu, S_s mu) / |t - s| against the previous listed time.
    double time_lipschitz = 0.0;
    bool envelope_ok = true;
};

/// Flat-distance Lipschitz probe of the discrete semigroup at level N. Rows are
/// flagged when the ratio exceeds exp(C t) (1 + tolerance) with C the field's
/// growth constant plus the source's Lipschitz constant.
std::vector<SemigroupRow> semigroup_probe(const Problem& problem, int N,
                                          const std::vector<std::pair<DiscreteMeasure, DiscreteMeasure>>& pairs,
                                          const std::vector<double>& times, double tolerance = 0.2,
                                          unsigned threads = 1);

struct GermRow {
    double t = 0.0;
    double error = 0.0;   // W^g(mu^N(t), germ(t))
    double excess = 0.0;  // error minus the t = 0 snap offset
};

struct GermReport {
    int N = 0;
    Point x0;
    double offset = 0.0;
    std::vector<GermRow> rows;
    /// Least-squares fit excess ~ a t^2 + b.
    double quadratic = 0.0;
    double intercept = 0.0;
    double max_fit_residual = 0.0;
};

/// Compares the scheme from delta_{x0} with the germ delta_{Phi_t(x0)} (+ t sigma
/// for a constant source), where Phi is the flow of the deterministic field
/// integrated with fine RK4 steps.
GermReport germ_compat_check(const PvfSpec& pvf, const std::optional<SourceSpec>& src, const Point& x0, int N,
                             const std::vector<double>& times);

/// Flow of a deterministic field by classical RK4 with `substeps` steps.
Point integrate_flow(const PvfSpec& pvf, const Point& x0, double t, int substeps = 4000);

/// W1 between a one-dimensional measure and the uniform distribution of the
/// same mass on [a, b], integrating |F - U| exactly.
double w1_to_uniform(const DiscreteMeasure& mu, double a, double b);

}  // namespace mflow
