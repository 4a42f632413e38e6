#include "measureflow/fields.hpp"

#include <algorithm>
#include <cmath>

#include "measureflow/errors.hpp"
#include "measureflow/fiber.hpp"
#include "measureflow/generalized.hpp"

namespace mflow {

BreakpointTable::BreakpointTable(std::vector<double> s, std::vector<double> values)
    : s_(std::move(s)), v_(std::move(values)) {
    if (s_.empty() || s_.size() != v_.size()) throw ConfigError("phi table needs matching, nonempty s and value lists");
    for (std::size_t k = 0; k < s_.size(); ++k) {
        if (!std::isfinite(s_[k]) || !std::isfinite(v_[k])) throw ConfigError("phi table entries must be finite");
        if (k > 0 && !(s_[k] > s_[k - 1])) throw ConfigError("phi breakpoints must be strictly increasing");
        if (k > 0 && v_[k] < v_[k - 1]) throw ConfigError("phi must be nondecreasing");
    }
}

double BreakpointTable::operator()(double s) const {
    if (s_.empty()) throw ConfigError("empty phi table");
    if (s <= s_.front()) return v_.front();
    if (s >= s_.back()) return v_.back();
    const auto it = std::upper_bound(s_.begin(), s_.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - s_.begin());
    const double t = (s - s_[k - 1]) / (s_[k] - s_[k - 1]);
    return v_[k - 1] + t * (v_[k] - v_[k - 1]);
}

double BreakpointTable::sup_abs() const {
    double m = 0.0;
    for (double v : v_) m = std::max(m, std::abs(v));
    return m;
}

PvfSpec PvfSpec::constant(const Point& c) {
    PvfSpec s;
    s.kind = Kind::deterministic;
    s.label = "constant velocity";
    s.velocity = [c](std::span<const double>) { return c; };
    s.growth_constant = std::max(euclidean_norm(c), 1e-12);
    return s;
}

PvfSpec PvfSpec::linear(std::size_t dim, std::vector<double> matrix, std::vector<double> offset) {
    if (matrix.size() != dim * dim || offset.size() != dim) throw ConfigError("linear field needs a dim x dim matrix");
    PvfSpec s;
    s.kind = Kind::deterministic;
    s.label = "linear velocity";
    // Frobenius norm bounds the operator norm.
    double fro = 0.0;
    for (double a : matrix) fro += a * a;
    s.growth_constant = std::max({std::sqrt(fro), euclidean_norm(offset), 1e-12});
    s.velocity = [dim, matrix = std::move(matrix), offset = std::move(offset)](std::span<const double> x) {
        Point v(offset);
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c) v[r] += matrix[r * dim + c] * x[c];
        return v;
    };
    return s;
}

PvfSpec PvfSpec::scaled_identity(std::size_t dim, double k) {
    std::vector<double> a(dim * dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) a[r * dim + r] = k;
    PvfSpec s = linear(dim, std::move(a), std::vector<double>(dim, 0.0));
    s.growth_constant = std::max(std::abs(k), 1e-12);
    return s;
}

PvfSpec PvfSpec::deterministic(VelocityField v, double growth_constant, std::string label) {
    if (!(growth_constant > 0.0)) throw ConfigError("growth constant must be positive");
    PvfSpec s;
    s.kind = Kind::deterministic;
    s.label = std::move(label);
    s.velocity = std::move(v);
    s.growth_constant = growth_constant;
    return s;
}

PvfSpec PvfSpec::diffusion(BreakpointTable phi, int quadrature_points) {
    if (quadrature_points < 1) throw ConfigError("quadrature_points must be positive");
    PvfSpec s;
    s.kind = Kind::diffusion1d;
    s.label = "finite-speed diffusion";
    s.growth_constant = std::max(phi.sup_abs(), 1e-12);
    s.phi = std::move(phi);
    s.quadrature_points = quadrature_points;
    return s;
}

PvfSpec PvfSpec::custom(LiftEvaluator f, double growth_constant, std::string label) {
    if (!(growth_constant > 0.0)) throw ConfigError("growth constant must be positive");
    PvfSpec s;
    s.kind = Kind::custom;
    s.label = std::move(label);
    s.evaluator = std::move(f);
    s.growth_constant = growth_constant;
    return s;
}

namespace {

LiftedMeasure lift_deterministic(const PvfSpec& spec, const DiscreteMeasure& mu) {
    const std::size_t n = mu.dim();
    std::vector<double> bases(mu.positions()), vel;
    vel.reserve(bases.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const Point v = spec.velocity(mu.position(i));
        if (v.size() != n) throw DimensionMismatch("velocity field returned a vector of the wrong dimension");
        vel.insert(vel.end(), v.begin(), v.end());
    }
    return LiftedMeasure(n, bases, vel, mu.weights(), MergePolicy{-1, 0.0});
}

LiftedMeasure lift_diffusion(const PvfSpec& spec, const DiscreteMeasure& mu) {
    if (mu.dim() != 1) throw DimensionMismatch("the diffusion field is defined in dimension 1 only");
    const int q = spec.quadrature_points;
    std::vector<double> bases, vel, w;
    bases.reserve(mu.size() * q);
    vel.reserve(mu.size() * q);
    w.reserve(mu.size() * q);
    double below = 0.0;  // F(x-)
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double m = mu.weight(i);
        const double lo = below;
        // Cumulative split points c_k = k m / q with c_q = m: consecutive ones are
        // within a factor two, so the differences are exact and sum to m exactly.
        double prev = 0.0;
        for (int k = 1; k <= q; ++k) {
            const double c = k == q ? m : (static_cast<double>(k) * m) / q;
            const double s = lo + (static_cast<double>(k) - 0.5) * m / q;
            bases.push_back(mu.position(i)[0]);
            vel.push_back(spec.phi(s));
            w.push_back(c - prev);
            prev = c;
        }
        below += m;
    }
    return LiftedMeasure(1, bases, vel, w, MergePolicy{-1, 0.0});
}

}  // namespace

LiftedMeasure evaluate_pvf(const PvfSpec& spec, const DiscreteMeasure& mu) {
    switch (spec.kind) {
        case PvfSpec::Kind::deterministic:
            if (!spec.velocity) throw ConfigError("deterministic field without a velocity function");
            return lift_deterministic(spec, mu);
        case PvfSpec::Kind::diffusion1d:
            return lift_diffusion(spec, mu);
        case PvfSpec::Kind::custom: {
            if (!spec.evaluator) throw ConfigError("custom field without an evaluator");
            LiftedMeasure v = spec.evaluator(mu);
            if (v.dim() != mu.dim()) throw DimensionMismatch("custom field changed the dimension");
            return v;
        }
    }
    throw ConfigError("unknown field kind");
}

bool satisfies_growth(const PvfSpec& spec, const LiftedMeasure& v) {
    double radius = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) radius = std::max(radius, euclidean_norm(v.base(i)));
    const double bound = spec.growth_constant * (1.0 + radius) * (1.0 + 1e-12);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (euclidean_norm(v.velocity(i)) > bound) return false;
    return true;
}

bool Ball::contains(std::span<const double> x) const {
    if (center.empty()) return euclidean_norm(x) <= radius;
    return euclidean_distance(x, center) <= radius;
}

SourceSpec SourceSpec::constant(DiscreteMeasure sigma, double radius) {
    if (!(radius > 0.0)) throw ConfigError("source support radius must be positive");
    if (sigma.support_radius() > radius) throw ConfigError("constant source is not supported in B(0, R)");
    SourceSpec s;
    s.kind = Kind::constant;
    s.label = "constant source";
    s.sigma = std::move(sigma);
    s.support_radius = radius;
    s.lipschitz_constant = 0.0;
    return s;
}

SourceSpec SourceSpec::proportional(double rate, double radius, std::optional<Ball> carrier) {
    if (!(radius > 0.0)) throw ConfigError("source support radius must be positive");
    if (!(rate >= 0.0)) throw ConfigError("proportional source rate must be nonnegative (sinks are not supported)");
    SourceSpec s;
    s.kind = Kind::proportional;
    s.label = "proportional source";
    s.rate = rate;
    s.support_radius = radius;
    s.carrier = std::move(carrier);
    s.lipschitz_constant = rate;
    return s;
}

SourceSpec SourceSpec::custom(std::function<DiscreteMeasure(const DiscreteMeasure&)> f, double lipschitz,
                              double radius, std::string label) {
    if (!(radius > 0.0)) throw ConfigError("source support radius must be positive");
    SourceSpec s;
    s.kind = Kind::custom;
    s.label = std::move(label);
    s.evaluator = std::move(f);
    s.lipschitz_constant = lipschitz;
    s.support_radius = radius;
    return s;
}

DiscreteMeasure evaluate_source(const SourceSpec& spec, const DiscreteMeasure& mu) {
    const double r = spec.support_radius;
    auto in_support = [r](std::span<const double> x) { return euclidean_norm(x) <= r; };
    switch (spec.kind) {
        case SourceSpec::Kind::constant:
            return spec.sigma;
        case SourceSpec::Kind::proportional: {
            if (spec.rate == 0.0) return DiscreteMeasure(mu.dim());
            const Ball carrier = spec.carrier.value_or(Ball{{}, r});
            auto kept = restrict_to(mu, [&](std::span<const double> x) { return in_support(x) && carrier.contains(x); });
            return scale(kept, spec.rate, MergePolicy{-1, 0.0});
        }
        case SourceSpec::Kind::custom: {
            if (!spec.evaluator) throw ConfigError("custom source without an evaluator");
            return restrict_to(spec.evaluator(mu), in_support);
        }
    }
    throw ConfigError("unknown source kind");
}

double probe_v2_lipschitz(const PvfSpec& spec, const std::vector<MeasurePair>& samples) {
    double k = 0.0;
    for (const auto& [mu, nu] : samples) {
        const double d = generalized_wasserstein(mu, nu).distance;
        if (!(d > 0.0)) continue;
        k = std::max(k, fiber_wg(evaluate_pvf(spec, mu), evaluate_pvf(spec, nu)).value / d);
    }
    return k;
}

double probe_s1_lipschitz(const SourceSpec& spec, const std::vector<MeasurePair>& samples) {
    double l = 0.0;
    for (const auto& [mu, nu] : samples) {
        const double d = generalized_wasserstein(mu, nu).distance;
        if (!(d > 0.0)) continue;
        l = std::max(l, generalized_wasserstein(evaluate_source(spec, mu), evaluate_source(spec, nu)).distance / d);
    }
    return l;
}

}  // namespace mflow
