#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "measureflow/measure.hpp"

namespace mflow {

/// Nondecreasing piecewise-linear function given by breakpoints, constant
/// beyond the first and last breakpoint.
class BreakpointTable {
public:
    BreakpointTable() = default;
    /// Throws ConfigError unless abscissae are strictly increasing and values nondecreasing.
    BreakpointTable(std::vector<double> s, std::vector<double> values);

    double operator()(double s) const;
    double sup_abs() const;
    const std::vector<double>& abscissae() const { return s_; }
    const std::vector<double>& values() const { return v_; }

private:
    std::vector<double> s_, v_;
};

using VelocityField = std::function<Point(std::span<const double>)>;
using LiftEvaluator = std::function<LiftedMeasure(const DiscreteMeasure&)>;

/// A probability vector field: maps a measure to a lifted measure with that
/// measure as its base projection.
struct PvfSpec {
    enum class Kind { deterministic, diffusion1d, custom };

    Kind kind = Kind::deterministic;
    /// Human-readable description, also used in reports.
    std::string label;
    /// Growth budget: emitted velocities satisfy |v| <= C (1 + max |x| on supp mu).
    double growth_constant = 1.0;

    VelocityField velocity;     // deterministic
    BreakpointTable phi;        // diffusion1d
    int quadrature_points = 8;  // diffusion1d
    LiftEvaluator evaluator;    // custom

    /// v(x) = c everywhere.
    static PvfSpec constant(const Point& c);
    /// v(x) = A x + b with A given row-major (dim x dim).
    static PvfSpec linear(std::size_t dim, std::vector<double> matrix, std::vector<double> offset);
    /// v(x) = k x.
    static PvfSpec scaled_identity(std::size_t dim, double k);
    static PvfSpec deterministic(VelocityField v, double growth_constant, std::string label = "custom field");
    /// Each atom's mass interval [F(x-), F(x)] of the distribution function is
    /// pushed through phi with a q-point midpoint rule. Dimension 1 only.
    static PvfSpec diffusion(BreakpointTable phi, int quadrature_points = 8);
    static PvfSpec custom(LiftEvaluator f, double growth_constant, std::string label = "custom");
};

LiftedMeasure evaluate_pvf(const PvfSpec& spec, const DiscreteMeasure& mu);

/// True iff every velocity of V satisfies the growth budget of `spec` relative
/// to the support radius of the base.
bool satisfies_growth(const PvfSpec& spec, const LiftedMeasure& v);

/// Closed ball used as a source carrier.
struct Ball {
    Point center;
    double radius = 0.0;
    bool contains(std::span<const double> x) const;
};

/// A mass source: maps a measure to a (nonnegative) measure of created mass per unit time.
struct SourceSpec {
    enum class Kind { constant, proportional, custom };

    Kind kind = Kind::constant;
    std::string label;
    /// Declared Lipschitz constant in the flat distance.
    double lipschitz_constant = 0.0;
    /// Every output is supported in the closed ball B(0, support_radius).
    double support_radius = 1.0;

    DiscreteMeasure sigma;                                       // constant
    double rate = 0.0;                                           // proportional
    std::optional<Ball> carrier;                                 // proportional, default B(0, R)
    std::function<DiscreteMeasure(const DiscreteMeasure&)> evaluator;  // custom

    /// Throws ConfigError if sigma is not supported in B(0, R).
    static SourceSpec constant(DiscreteMeasure sigma, double radius);
    static SourceSpec proportional(double rate, double radius, std::optional<Ball> carrier = std::nullopt);
    static SourceSpec custom(std::function<DiscreteMeasure(const DiscreteMeasure&)> f, double lipschitz,
                             double radius, std::string label = "custom");
};

/// Output is clipped to B(0, R).
DiscreteMeasure evaluate_source(const SourceSpec& spec, const DiscreteMeasure& mu);

using MeasurePair = std::pair<DiscreteMeasure, DiscreteMeasure>;

/// max over samples of fiber_wg(V[mu], V[nu]) / W^g(mu, nu); pairs at distance 0 are skipped.
/// Returns 0 when every pair is skipped.
double probe_v2_lipschitz(const PvfSpec& spec, const std::vector<MeasurePair>& samples);

/// max over samples of W^g(s[mu], s[nu]) / W^g(mu, nu); pairs at distance 0 are skipped.
double probe_s1_lipschitz(const SourceSpec& spec, const std::vector<MeasurePair>& samples);

}  // namespace mflow
