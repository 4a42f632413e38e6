#include <cmath>

#include "doctest.h"
#include "measureflow/analysis.hpp"
#include "measureflow/errors.hpp"
#include "measureflow/generalized.hpp"
#include "measureflow/transport.hpp"

using namespace mflow;

TEST_CASE("test function gradients agree with finite differences") {
    for (std::size_t dim = 1; dim <= 3; ++dim) {
        const Point c(dim, 0.25);
        CHECK(gradient_consistency(TestFunction::bump(c, 1.5)) < 1e-5);
        CHECK(gradient_consistency(TestFunction::plateau(c, 0.5, 2.0)) < 1e-5);
        CHECK(gradient_consistency(TestFunction::windowed_linear(c, 0.5, 2.0, Point(dim, 0.7), 0.3)) < 1e-5);
    }
}

TEST_CASE("test function shapes and bounds") {
    auto b = TestFunction::bump({0.0}, 1.0);
    CHECK(b(Point{0.0}) == doctest::Approx(1.0));
    CHECK(b(Point{1.0}) == 0.0);
    CHECK(b(Point{-3.0}) == 0.0);
    CHECK(b.sup_norm == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(b.c1_norm >= 1.0);
    auto p = TestFunction::plateau({0.0, 0.0}, 1.0, 2.0);
    CHECK(p(Point{0.5, 0.5}) == 1.0);
    CHECK(p(Point{2.0, 0.1}) == 0.0);
    CHECK(p(Point{1.5, 0.0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(TestFunction::plateau({0.0}, 2.0, 1.0), ConfigError);
    CHECK_THROWS_AS(TestFunction::bump({0.0}, 0.0), ConfigError);
}

TEST_CASE("w1 to uniform closed forms") {
    // delta at the midpoint: integral of |F - U| is (b - a) / 4.
    CHECK(w1_to_uniform(DiscreteMeasure::dirac({0.0}), -1.0, 1.0) == doctest::Approx(0.5));
    // Particles at cell midpoints: M cells of width 1/M each each contribute 1/(4 M^2).
    const int M = 10;
    std::vector<std::pair<Point, double>> atoms;
    for (int i = 0; i < M; ++i) atoms.push_back({{(i + 0.5) / M}, 1.0 / M});
    CHECK(w1_to_uniform(DiscreteMeasure::from_atoms(1, atoms), 0.0, 1.0) == doctest::Approx(1.0 / (4.0 * M)));
    // Atom outside the interval.
    CHECK(w1_to_uniform(DiscreteMeasure::dirac({2.0}), 0.0, 1.0) == doctest::Approx(1.5));
    // Degenerate interval reduces to W1 against a Dirac.
    CHECK(w1_to_uniform(DiscreteMeasure::dirac({0.5}, 2.0), 0.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("rate fit") {
    double rate = 0.0;
    bool exact = false;
    std::size_t points = 0;
    fit_rate({4, 8, 16}, {0.25, 0.125, 0.0625}, rate, exact, points);
    CHECK(rate == doctest::Approx(1.0));
    CHECK_FALSE(exact);
    CHECK(points == 3);
    fit_rate({4, 8, 16}, {0.0, 0.0, 1e-16}, rate, exact, points);
    CHECK(exact);
    CHECK(std::isinf(rate));
}

TEST_CASE("presets are well formed") {
    for (const auto& name : preset_names()) {
        auto p = preset_problem(name);
        CHECK(p.name == name);
        CHECK(p.initial.mass() == 1.0);
    }
    CHECK_THROWS_AS(preset_problem("nope"), ConfigError);
    CHECK(parse_metric("gw") == Metric::gw);
    CHECK_THROWS_AS(parse_metric("w2"), ConfigError);
}

TEST_CASE("translation is reproduced exactly") {
    auto report = convergence_study(preset_problem("translate"), {4, 8, 16}, Metric::w1);
    CHECK(report.rate_basis == "reference");
    CHECK(report.exact);
    for (const auto& r : report.results) {
        CHECK_FALSE(r.overflow);
        REQUIRE(r.reference_error);
        CHECK(*r.reference_error < 1e-14);
    }
}

TEST_CASE("grid-aligned source-only problem is reproduced exactly") {
    auto report = convergence_study(preset_problem("source_only"), {4, 8, 16, 32}, Metric::gw, 2);
    CHECK(report.exact);
    for (const auto& r : report.results) CHECK(r.final_mass == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("convergence study is independent of the thread count") {
    const auto p = preset_problem("expansion");
    auto a = convergence_study(p, {4, 8, 16}, Metric::w1, 1);
    auto b = convergence_study(p, {4, 8, 16}, Metric::w1, 3);
    REQUIRE(a.results.size() == b.results.size());
    for (std::size_t k = 0; k < a.results.size(); ++k) {
        CHECK(a.results[k].reference_error == b.results[k].reference_error);
        CHECK(a.results[k].successive_distance == b.results[k].successive_distance);
    }
    CHECK(a.rate == b.rate);
    CHECK(a.rate > 0.7);
    CHECK_THROWS_AS(convergence_study(p, {4, 8}, Metric::w1), ConfigError);
    CHECK_THROWS_AS(convergence_study(p, {8, 4, 16}, Metric::w1), ConfigError);
}

TEST_CASE("overflowing levels are reported, not fitted") {
    Problem p = preset_problem("translate");
    p.T = 3.0;
    p.extent = ExtentMode::fixed;
    p.fixed_half_width = 2.0;
    auto report = convergence_study(p, {2, 4, 8}, Metric::w1);
    for (const auto& r : report.results) {
        CHECK(r.overflow);
        CHECK_FALSE(r.note.empty());
    }
    CHECK(report.fitted_points == 0);
}

TEST_CASE("weak residual shrinks with refinement") {
    const auto p = preset_problem("expansion");
    const auto f = TestFunction::bump({1.5}, 1.0);
    const double coarse = weak_residual(p.run(8), f, 0.25, 0.125);
    const double fine = weak_residual(p.run(32), f, 0.25, 0.03125);
    CHECK(fine < coarse);
    CHECK(fine < 0.2);
    CHECK_THROWS_AS(weak_residual(p.run(4), f, 0.9, 0.5), std::out_of_range);
}

TEST_CASE("semigroup probe stays inside the exponential envelope") {
    const auto p = preset_problem("expansion");
    std::vector<std::pair<DiscreteMeasure, DiscreteMeasure>> pairs{
        {DiscreteMeasure::dirac({1.0}), DiscreteMeasure::dirac({1.25})},
        {DiscreteMeasure::dirac({0.5}), DiscreteMeasure::dirac({0.5})},
    };
    auto rows = semigroup_probe(p, 16, pairs, {0.0, 0.25, 0.5}, 0.2, 2);
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) CHECK(r.envelope_ok);
    CHECK(rows[3].ratio == 1.0);  // identical initial data
    CHECK(rows[1].time_lipschitz > 0.0);
}

TEST_CASE("germ compatibility excess is quadratic in time") {
    auto pvf = PvfSpec::scaled_identity(1, 1.0);
    auto report = germ_compat_check(pvf, std::nullopt, {0.5}, 64, {1.0 / 64, 2.0 / 64, 4.0 / 64, 8.0 / 64});
    CHECK(report.offset < 1e-12);
    for (const auto& r : report.rows) CHECK(r.error < 0.05);
    CHECK(integrate_flow(pvf, {1.0}, 1.0)[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("weak residual of a constant-on-support test function is the mass balance") {
    const auto p = preset_problem("source_only");
    const auto traj = p.run(8);
    const auto one = TestFunction::plateau({0.0}, 2.0, 3.0);
    for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
        const double h = traj.times[k + 1] - traj.times[k];
        const double balance =
            std::abs((traj.masses[k + 1] - traj.masses[k]) / h - evaluate_source(*p.src, traj.states[k]).mass());
        CHECK(weak_residual(traj, one, traj.times[k], h) == doctest::Approx(balance).epsilon(1e-12));
    }
}

TEST_CASE("weak residual vanishes for a zero field without source") {
    Problem p;
    p.name = "rest";
    p.initial = DiscreteMeasure::from_atoms(1, {{{0.25}, 0.5}, {{-0.5}, 0.5}});
    p.pvf = PvfSpec::constant({0.0});
    const auto traj = p.run(8);
    const auto f = TestFunction::windowed_linear({0.0}, 0.5, 1.5, {1.0}, 0.2);
    CHECK(weak_residual(traj, f, 0.25, 0.125) == 0.0);
}
