#include "measureflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "measureflow/errors.hpp"
#include "measureflow/generalized.hpp"
#include "measureflow/parallel.hpp"
#include "measureflow/transport.hpp"

namespace mflow {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// Smooth transition from 1 (u <= 0) to 0 (u >= 1) and its derivative.
double smooth_step(double u, double* derivative) {
    if (u <= 0.0 || u >= 1.0) {
        if (derivative) *derivative = 0.0;
        return u <= 0.0 ? 1.0 : 0.0;
    }
    const double a = std::exp(-1.0 / (1.0 - u));
    const double b = std::exp(-1.0 / u);
    if (derivative) {
        const double da = -a / ((1.0 - u) * (1.0 - u));
        const double db = b / (u * u);
        *derivative = (da * b - a * db) / ((a + b) * (a + b));
    }
    return a / (a + b);
}

// Deterministic sampling of sup |f| and sup |grad f| over the support ball.
void measure_bounds(TestFunction& f) {
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = f.center.size();
    double sup = 0.0, grad = 0.0;
    Point x(n);
    for (int s = 0; s < 20000; ++s) {
        double norm = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            x[k] = g(rng);
            norm += x[k] * x[k];
        }
        norm = std::sqrt(norm);
        const double r = f.radius * std::pow(u(rng), 1.0 / static_cast<double>(n));
        for (std::size_t k = 0; k < n; ++k) x[k] = f.center[k] + r * x[k] / norm;
        sup = std::max(sup, std::abs(f.value(x)));
        grad = std::max(grad, euclidean_norm(f.gradient(x)));
    }
    sup = std::max(sup, std::abs(f.value(f.center)));
    f.sup_norm = sup;
    f.c1_norm = std::max(sup, grad);
}

}  // namespace

TestFunction TestFunction::bump(const Point& center, double radius) {
    if (!(radius > 0.0)) throw ConfigError("bump radius must be positive");
    TestFunction f;
    f.label = "bump";
    f.center = center;
    f.radius = radius;
    const double r2 = radius * radius;
    f.value = [center, r2](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - center[k]) * (x[k] - center[k]);
        s /= r2;
        return s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s)) : 0.0;
    };
    f.gradient = [center, r2](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - center[k]) * (x[k] - center[k]);
        s /= r2;
        Point g(x.size(), 0.0);
        if (s >= 1.0) return g;
        const double v = std::exp(1.0 - 1.0 / (1.0 - s));
        const double c = -v * 2.0 / (r2 * (1.0 - s) * (1.0 - s));
        for (std::size_t k = 0; k < x.size(); ++k) g[k] = c * (x[k] - center[k]);
        return g;
    };
    measure_bounds(f);
    return f;
}

TestFunction TestFunction::plateau(const Point& center, double inner, double outer) {
    if (!(inner >= 0.0) || !(outer > inner)) throw ConfigError("plateau needs 0 <= inner < outer");
    TestFunction f;
    f.label = "plateau";
    f.center = center;
    f.radius = outer;
    const double width = outer - inner;
    f.value = [center, inner, width](std::span<const double> x) {
        return smooth_step((euclidean_distance(x, center) - inner) / width, nullptr);
    };
    f.gradient = [center, inner, width](std::span<const double> x) {
        const double r = euclidean_distance(x, center);
        Point g(x.size(), 0.0);
        double d = 0.0;
        smooth_step((r - inner) / width, &d);
        if (d == 0.0 || r == 0.0) return g;
        for (std::size_t k = 0; k < x.size(); ++k) g[k] = d * (x[k] - center[k]) / (r * width);
        return g;
    };
    measure_bounds(f);
    return f;
}

TestFunction TestFunction::windowed_linear(const Point& center, double inner, double outer, const Point& a,
                                           double b) {
    if (a.size() != center.size()) throw DimensionMismatch("slope vector has the wrong dimension");
    TestFunction window = plateau(center, inner, outer);
    TestFunction f;
    f.label = "windowed linear";
    f.center = center;
    f.radius = outer;
    auto wv = window.value;
    auto wg = window.gradient;
    auto affine = [center, a, b](std::span<const double> x) {
        double s = b;
        for (std::size_t k = 0; k < x.size(); ++k) s += a[k] * (x[k] - center[k]);
        return s;
    };
    f.value = [wv, affine](std::span<const double> x) { return affine(x) * wv(x); };
    f.gradient = [wv, wg, affine, a](std::span<const double> x) {
        Point g = wg(x);
        const double p = wv(x), l = affine(x);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = a[k] * p + l * g[k];
        return g;
    };
    measure_bounds(f);
    return f;
}

double gradient_consistency(const TestFunction& f, std::size_t samples, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t n = f.center.size();
    const double h = 1e-5 * f.radius;
    double worst = 0.0;
    Point x(n);
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t k = 0; k < n; ++k) x[k] = f.center[k] + f.radius * u(rng) / std::sqrt(double(n));
        const Point g = f.gradient(x);
        Point fd(n);
        for (std::size_t k = 0; k < n; ++k) {
            Point p = x, m = x;
            p[k] += h;
            m[k] -= h;
            fd[k] = (f.value(p) - f.value(m)) / (2.0 * h);
        }
        double diff = 0.0;
        for (std::size_t k = 0; k < n; ++k) diff = std::max(diff, std::abs(fd[k] - g[k]));
        const double scale = std::max(euclidean_norm(g), 1e-3 * std::max(f.c1_norm, 1e-12));
        worst = std::max(worst, diff / scale);
    }
    return worst;
}

double weak_residual(const Trajectory& traj, const TestFunction& f, double t, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("residual step h must be positive");
    const double T = traj.final_time();
    if (t < 0.0 || t + h > T * (1.0 + 1e-12)) throw std::out_of_range("residual window outside the trajectory span");
    const DiscreteMeasure now = traj.state_at(t);
    const DiscreteMeasure later = traj.state_at(std::min(t + h, T));
    const double dfdt = (later.integrate(f.value) - now.integrate(f.value)) / h;
    double transport = 0.0;
    if (traj.pvf) {
        const LiftedMeasure v = evaluate_pvf(*traj.pvf, now);
        for (std::size_t a = 0; a < v.size(); ++a) transport += v.weight(a) * dot(f.gradient(v.base(a)), v.velocity(a));
    }
    double source = 0.0;
    if (traj.src) source = evaluate_source(*traj.src, now).integrate(f.value);
    return std::abs(dfdt - transport - source);
}

LatticeGrid Problem::grid(int N) const {
    switch (extent) {
        case ExtentMode::standard:
            return LatticeGrid::standard(N, dim);
        case ExtentMode::adaptive:
            return adaptive_grid(N, initial, pvf, src, T);
        case ExtentMode::fixed:
            return LatticeGrid::with_extent(N, dim, fixed_half_width, fixed_half_width);
    }
    throw ConfigError("unknown extent mode");
}

Trajectory Problem::run(int N) const { return run_semigroup(grid(N), initial, pvf, src, T); }

std::vector<std::string> preset_names() { return {"translate", "diffusion1d", "source_only", "expansion"}; }

Problem preset_problem(const std::string& name) {
    Problem p;
    p.name = name;
    p.dim = 1;
    p.T = 1.0;
    p.initial = DiscreteMeasure::dirac({0.0});
    if (name == "translate") {
        p.pvf = PvfSpec::constant({1.0});
        p.reference = [](double t) { return DiscreteMeasure::dirac({t}); };
    } else if (name == "diffusion1d") {
        p.pvf = PvfSpec::diffusion(BreakpointTable({0.0, 1.0}, {-0.5, 0.5}), 8);
    } else if (name == "source_only") {
        auto sigma = DiscreteMeasure::from_atoms(1, {{{0.5}, 0.5}, {{-0.25}, 0.25}});
        p.src = SourceSpec::constant(sigma, 1.0);
        p.reference = [mu0 = p.initial, sigma](double t) { return add(mu0, scale(sigma, t)); };
    } else if (name == "expansion") {
        p.initial = DiscreteMeasure::dirac({1.0});
        p.pvf = PvfSpec::scaled_identity(1, 1.0);
        p.extent = ExtentMode::adaptive;
        p.reference = [](double t) { return DiscreteMeasure::dirac({std::exp(t)}); };
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return p;
}

Metric parse_metric(const std::string& s) {
    if (s == "w1") return Metric::w1;
    if (s == "gw") return Metric::gw;
    throw ConfigError("metric must be w1 or gw, got '" + s + "'");
}

std::string metric_name(Metric m) { return m == Metric::w1 ? "w1" : "gw"; }

double measure_distance(const DiscreteMeasure& a, const DiscreteMeasure& b, Metric m) {
    return m == Metric::w1 ? wasserstein1(a, b).distance : generalized_wasserstein(a, b).distance;
}

void fit_rate(const std::vector<double>& N, const std::vector<double>& d, double& rate, bool& exact,
              std::size_t& points) {
    constexpr double kRoundingLevel = 1e-14;
    std::vector<double> x, y;
    for (std::size_t k = 0; k < N.size(); ++k) {
        if (d[k] > kRoundingLevel) {
            x.push_back(std::log(N[k]));
            y.push_back(-std::log(d[k]));
        }
    }
    points = N.size();
    exact = !N.empty() && x.empty();
    if (exact) {
        rate = std::numeric_limits<double>::infinity();
        return;
    }
    points = x.size();
    if (x.size() < 2) {
        rate = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
    }
    rate = sxy / sxx;
}

ConvergenceReport convergence_study(const Problem& problem, const std::vector<int>& levels, Metric metric,
                                    unsigned threads) {
    if (levels.size() < 3) throw ConfigError("a convergence study needs at least three levels");
    for (std::size_t k = 1; k < levels.size(); ++k)
        if (levels[k] <= levels[k - 1]) throw ConfigError("levels must be strictly increasing");

    ConvergenceReport report;
    report.problem = problem.name;
    report.metric = metric_name(metric);
    report.levels = levels;
    const std::size_t L = levels.size();
    report.results.resize(L);
    std::vector<std::optional<Trajectory>> runs(L);
    parallel_for(L, threads, [&](std::size_t k) {
        auto& r = report.results[k];
        r.N = levels[k];
        try {
            runs[k] = problem.run(levels[k]);
            r.steps = runs[k]->states.size() - 1;
            r.final_mass = runs[k]->masses.back();
            r.final_atoms = runs[k]->states.back().size();
        } catch (const SupportOverflow& e) {
            r.overflow = true;
            r.note = e.what();
        }
    });

    // Distance tasks: one per level against the reference, one per consecutive pair.
    parallel_for(2 * L, threads, [&](std::size_t task) {
        const std::size_t k = task / 2;
        auto& r = report.results[k];
        if (!runs[k]) return;
        const Trajectory& a = *runs[k];
        if (task % 2 == 0) {
            if (!problem.reference) return;
            double sup = 0.0;
            for (std::size_t s = 0; s < a.times.size(); ++s)
                sup = std::max(sup, measure_distance(a.states[s], problem.reference(a.times[s]), metric));
            r.reference_error = sup;
        } else {
            if (k + 1 >= L || !runs[k + 1]) return;
            const Trajectory& b = *runs[k + 1];
            double sup = 0.0;
            for (std::size_t s = 0; s < a.times.size(); ++s)
                sup = std::max(sup, measure_distance(a.states[s], b.state_at(a.times[s]), metric));
            r.successive_distance = sup;
            r.next_N = levels[k + 1];
        }
    });

    std::vector<double> ns, ds;
    report.rate_basis = problem.reference ? "reference" : "successive";
    for (const auto& r : report.results) {
        const auto& d = problem.reference ? r.reference_error : r.successive_distance;
        if (d) {
            ns.push_back(r.N);
            ds.push_back(*d);
        }
    }
    fit_rate(ns, ds, report.rate, report.exact, report.fitted_points);
    return report;
}

std::vector<SemigroupRow> semigroup_probe(const Problem& problem, int N,
                                          const std::vector<std::pair<DiscreteMeasure, DiscreteMeasure>>& pairs,
                                          const std::vector<double>& times, double tolerance, unsigned threads) {
    if (times.empty()) throw ConfigError("semigroup probe needs at least one time");
    std::vector<double> ts(times);
    std::sort(ts.begin(), ts.end());
    if (ts.front() < 0.0) throw ConfigError("probe times must be nonnegative");
    const double T = std::max(ts.back(), 1.0 / N);
    const double c = (problem.pvf ? problem.pvf->growth_constant : 0.0) +
                     (problem.src ? problem.src->lipschitz_constant : 0.0);

    std::vector<std::vector<SemigroupRow>> per_pair(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        auto run_from = [&](const DiscreteMeasure& m) {
            Problem q = problem;
            q.initial = m;
            q.T = T;
            return q.run(N);
        };
        const Trajectory a = run_from(pairs[p].first);
        const Trajectory b = run_from(pairs[p].second);
        const double d0 = generalized_wasserstein(pairs[p].first, pairs[p].second).distance;
        DiscreteMeasure prev = a.state_at(ts.front());
        double prev_t = ts.front();
        for (std::size_t k = 0; k < ts.size(); ++k) {
            SemigroupRow row;
            row.pair = p;
            row.t = ts[k];
            row.initial_distance = d0;
            const DiscreteMeasure at = a.state_at(ts[k]);
            row.distance = generalized_wasserstein(at, b.state_at(ts[k])).distance;
            if (d0 > 0.0)
                row.ratio = row.distance / d0;
            else
                row.ratio = row.distance > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
            row.implied_C = row.t > 0.0 ? std::log(row.ratio) / row.t : 0.0;
            if (k > 0 && ts[k] > prev_t) row.time_lipschitz = generalized_wasserstein(at, prev).distance / (ts[k] - prev_t);
            row.envelope_ok = row.ratio <= std::exp(c * row.t) * (1.0 + tolerance);
            per_pair[p].push_back(row);
            prev = at;
            prev_t = ts[k];
        }
    });
    std::vector<SemigroupRow> rows;
    for (auto& v : per_pair) rows.insert(rows.end(), v.begin(), v.end());
    return rows;
}

Point integrate_flow(const PvfSpec& pvf, const Point& x0, double t, int substeps) {
    if (pvf.kind != PvfSpec::Kind::deterministic || !pvf.velocity)
        throw ConfigError("flow integration needs a deterministic field");
    Point x = x0;
    if (t == 0.0) return x;
    const double h = t / substeps;
    const std::size_t n = x.size();
    auto axpy = [n](const Point& a, double s, const Point& b) {
        Point r(n);
        for (std::size_t k = 0; k < n; ++k) r[k] = a[k] + s * b[k];
        return r;
    };
    for (int s = 0; s < substeps; ++s) {
        const Point k1 = pvf.velocity(x);
        const Point k2 = pvf.velocity(axpy(x, h / 2, k1));
        const Point k3 = pvf.velocity(axpy(x, h / 2, k2));
        const Point k4 = pvf.velocity(axpy(x, h, k3));
        for (std::size_t k = 0; k < n; ++k) x[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    return x;
}

GermReport germ_compat_check(const PvfSpec& pvf, const std::optional<SourceSpec>& src, const Point& x0, int N,
                             const std::vector<double>& times) {
    if (pvf.kind != PvfSpec::Kind::deterministic) throw ConfigError("germ check needs a deterministic field");
    if (src && src->kind != SourceSpec::Kind::constant) throw ConfigError("germ check supports constant sources only");
    if (times.empty()) throw ConfigError("germ check needs at least one time");
    Problem p;
    p.name = "germ";
    p.dim = x0.size();
    p.initial = DiscreteMeasure::dirac(x0);
    p.pvf = pvf;
    p.src = src;
    p.T = std::max(*std::max_element(times.begin(), times.end()), 1.0 / N);
    p.extent = ExtentMode::adaptive;
    const Trajectory traj = p.run(N);

    auto germ = [&](double t) {
        DiscreteMeasure g = DiscreteMeasure::dirac(integrate_flow(pvf, x0, t));
        if (src) g = add(g, scale(src->sigma, t));
        return g;
    };
    GermReport r;
    r.N = N;
    r.x0 = x0;
    r.offset = generalized_wasserstein(traj.state_at(0.0), germ(0.0)).distance;
    for (double t : times) {
        GermRow row;
        row.t = t;
        row.error = generalized_wasserstein(traj.state_at(t), germ(t)).distance;
        row.excess = row.error - r.offset;
        r.rows.push_back(row);
    }
    // Least squares excess = a t^2 + b.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(r.rows.size());
    for (const auto& row : r.rows) {
        const double x = row.t * row.t;
        sx += x;
        sy += row.excess;
        sxx += x * x;
        sxy += x * row.excess;
    }
    const double den = n * sxx - sx * sx;
    r.quadratic = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    r.intercept = (sy - r.quadratic * sx) / n;
    for (const auto& row : r.rows)
        r.max_fit_residual =
            std::max(r.max_fit_residual, std::abs(row.excess - r.quadratic * row.t * row.t - r.intercept));
    return r;
}

double w1_to_uniform(const DiscreteMeasure& mu, double a, double b) {
    if (mu.dim() != 1) throw DimensionMismatch("w1_to_uniform requires dimension 1");
    const double m = mu.mass();
    if (!(b > a)) return wasserstein1_1d(mu, DiscreteMeasure::dirac({a}, m));
    auto U = [&](double x) { return m * std::clamp((x - a) / (b - a), 0.0, 1.0); };
    std::vector<double> xs{a, b};
    for (std::size_t i = 0; i < mu.size(); ++i) xs.push_back(mu.position(i)[0]);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    double total = 0.0, below = 0.0;
    std::size_t i = 0;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        while (i < mu.size() && mu.position(i)[0] <= xs[k]) below += mu.weight(i++);
        const double p = xs[k], q = xs[k + 1];
        // On (p, q) F = below and U is affine.
        const double u0 = U(p) - below, u1 = U(q) - below;
        if (u0 * u1 >= 0.0) {
            total += 0.5 * std::abs(u0 + u1) * (q - p);
        } else {
            const double r = p + (q - p) * u0 / (u0 - u1);
            total += 0.5 * (std::abs(u0) * (r - p) + std::abs(u1) * (q - r));
        }
    }
    return total;
}

}  // namespace mflow
