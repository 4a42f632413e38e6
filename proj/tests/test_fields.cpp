#include <random>

#include "doctest.h"
#include "measureflow/errors.hpp"
#include "measureflow/fields.hpp"
#include "measureflow/transport.hpp"
#include "oracles.hpp"

using namespace mflow;

namespace {

BreakpointTable centered() { return BreakpointTable({0.0, 1.0}, {-0.5, 0.5}); }

}  // namespace

TEST_CASE("deterministic field lifts each atom to its velocity") {
    auto v = evaluate_pvf(PvfSpec::scaled_identity(1, 1.0), DiscreteMeasure::dirac({2.0}));
    REQUIRE(v.size() == 1);
    CHECK(v.base(0)[0] == 2.0);
    CHECK(v.velocity(0)[0] == 2.0);
    CHECK(v.weight(0) == 1.0);
    auto c = evaluate_pvf(PvfSpec::constant({1.0, -2.0}), DiscreteMeasure::dirac({0.5, 0.5}));
    CHECK(c.velocity(0)[1] == -2.0);
}

TEST_CASE("diffusion field splits each jump of the distribution function") {
    auto spec = PvfSpec::diffusion(centered(), 2);
    auto v = evaluate_pvf(spec, DiscreteMeasure::dirac({0.0}));
    REQUIRE(v.size() == 2);
    CHECK(v.velocity(0)[0] == doctest::Approx(-0.25));
    CHECK(v.velocity(1)[0] == doctest::Approx(0.25));
    CHECK(v.weight(0) == 0.5);

    auto two = DiscreteMeasure::from_atoms(1, {{{0.0}, 0.5}, {{1.0}, 0.5}});
    auto w = evaluate_pvf(PvfSpec::diffusion(centered(), 1), two);
    REQUIRE(w.size() == 2);
    CHECK(w.base(0)[0] == 0.0);
    CHECK(w.velocity(0)[0] == doctest::Approx(-0.25));
    CHECK(w.base(1)[0] == 1.0);
    CHECK(w.velocity(1)[0] == doctest::Approx(0.25));
    CHECK_THROWS_AS(evaluate_pvf(spec, DiscreteMeasure::dirac({0.0, 0.0})), DimensionMismatch);
}

TEST_CASE("phi tables are validated") {
    CHECK_THROWS_AS(BreakpointTable({0.0, 1.0}, {0.5, -0.5}), ConfigError);
    CHECK_THROWS_AS(BreakpointTable({1.0, 0.0}, {0.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(BreakpointTable({0.0}, {}), ConfigError);
    auto t = BreakpointTable({0.0, 1.0, 2.0}, {0.0, 1.0, 1.0});
    CHECK(t(-1.0) == 0.0);
    CHECK(t(0.5) == 0.5);
    CHECK(t(5.0) == 1.0);
}

TEST_CASE("projection identity and growth budget of built-in fields") {
    std::mt19937_64 rng(12);
    std::vector<PvfSpec> specs{PvfSpec::constant({1.0}), PvfSpec::scaled_identity(1, 1.0),
                               PvfSpec::linear(1, {-0.5}, {0.25}), PvfSpec::diffusion(centered(), 8),
                               PvfSpec::diffusion(BreakpointTable({0, 0.3, 2.0}, {-1, 0, 0.4}), 5)};
    for (int trial = 0; trial < 40; ++trial) {
        auto mu = oracle::random_measure(rng, 1, 12, -3, 3, trial % 2 ? 1.0 : -1.0);
        for (const auto& s : specs) {
            auto v = evaluate_pvf(s, mu);
            CHECK(base_projection(v) == mu);
            CHECK(satisfies_growth(s, v));
        }
    }
}

TEST_CASE("diffusion quadrature converges at first order") {
    // Per-atom fiber distributions for q and 2q: the gap halves when q doubles.
    auto mu = DiscreteMeasure::dirac({0.0});
    double prev = -1.0;
    for (int q = 2; q <= 64; q *= 2) {
        auto a = evaluate_pvf(PvfSpec::diffusion(centered(), q), mu);
        auto b = evaluate_pvf(PvfSpec::diffusion(centered(), 2 * q), mu);
        auto fiber = [](const LiftedMeasure& v) {
            std::vector<double> x, w;
            for (std::size_t i = 0; i < v.size(); ++i) {
                x.push_back(v.velocity(i)[0]);
                w.push_back(v.weight(i));
            }
            return DiscreteMeasure(1, x, w);
        };
        const double d = wasserstein1_1d(fiber(a), fiber(b));
        if (prev > 0.0) CHECK(d == doctest::Approx(prev / 2.0).epsilon(1e-6));
        prev = d;
    }
}

TEST_CASE("sources") {
    auto sigma = DiscreteMeasure::dirac({1.0});
    auto c = SourceSpec::constant(sigma, 2.0);
    CHECK(evaluate_source(c, DiscreteMeasure::dirac({-1.0}, 3.0)) == sigma);
    CHECK_THROWS_AS(SourceSpec::constant(DiscreteMeasure::dirac({5.0}), 2.0), ConfigError);
    CHECK(evaluate_source(SourceSpec::proportional(0.0, 1.0), DiscreteMeasure::dirac({0.0})).empty());
    CHECK(evaluate_source(SourceSpec::proportional(0.5, 1.0), DiscreteMeasure::dirac({0.0})) ==
          DiscreteMeasure::dirac({0.0}, 0.5));
    // Mass outside B(0, R) does not generate anything.
    auto far = DiscreteMeasure::from_atoms(1, {{{0.0}, 1.0}, {{3.0}, 1.0}});
    CHECK(evaluate_source(SourceSpec::proportional(1.0, 1.0), far).mass() == 1.0);
    CHECK_THROWS_AS(SourceSpec::proportional(-1.0, 1.0), ConfigError);
    auto custom = SourceSpec::custom([](const DiscreteMeasure&) {
        return DiscreteMeasure::from_atoms(1, {{{0.5}, 1.0}, {{9.0}, 1.0}});
    }, 0.0, 1.0);
    CHECK(evaluate_source(custom, DiscreteMeasure(1)).mass() == 1.0);
}

TEST_CASE("lipschitz probes") {
    std::vector<MeasurePair> singles;
    for (double a : {-1.0, 0.0, 0.5})
        for (double b : {-0.5, 0.25, 1.5}) singles.push_back({DiscreteMeasure::dirac({a}), DiscreteMeasure::dirac({b})});
    // v(x) = x: for single atoms at distance < 2 the fiber cost equals the base distance.
    const double k = probe_v2_lipschitz(PvfSpec::scaled_identity(1, 1.0), singles);
    CHECK(k == doctest::Approx(1.0).epsilon(1e-9));
    std::vector<MeasurePair> same{{DiscreteMeasure::dirac({0.0}), DiscreteMeasure::dirac({0.0})}};
    CHECK(probe_v2_lipschitz(PvfSpec::scaled_identity(1, 1.0), same) == 0.0);

    std::mt19937_64 rng(3);
    std::vector<MeasurePair> random;
    for (int t = 0; t < 6; ++t)
        random.push_back({oracle::random_measure(rng, 1, 3, -1, 1), oracle::random_measure(rng, 1, 3, -1, 1)});
    const double kd = probe_v2_lipschitz(PvfSpec::diffusion(centered(), 4), random);
    CHECK(std::isfinite(kd));
    CHECK(kd >= 0.0);

    CHECK(probe_s1_lipschitz(SourceSpec::constant(DiscreteMeasure::dirac({0.0}), 1.0), random) == 0.0);
    CHECK(probe_s1_lipschitz(SourceSpec::proportional(0.5, 10.0), same) == 0.0);
    CHECK(probe_s1_lipschitz(SourceSpec::proportional(0.5, 10.0), random) <= 0.5 + 1e-9);
}
