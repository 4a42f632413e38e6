#include <random>

#include "doctest.h"
#include "measureflow/errors.hpp"
#include "measureflow/generalized.hpp"
#include "oracles.hpp"

using namespace mflow;

namespace {

void check_witness(const GwSolution& g, const DiscreteMeasure& a, const DiscreteMeasure& b) {
    CHECK(g.distance == doctest::Approx(g.kept1.removed_mass + g.kept2.removed_mass + g.transport_cost));
    CHECK(g.kept1.kept.mass() == doctest::Approx(g.kept2.kept.mass()).epsilon(1e-9));
    CHECK(g.kept1.kept.mass() + g.kept1.removed_mass == doctest::Approx(a.mass()));
    CHECK(g.kept2.kept.mass() + g.kept2.removed_mass == doctest::Approx(b.mass()));
    for (std::size_t i = 0; i < g.kept1.kept.size(); ++i)
        CHECK(g.kept1.kept.weight(i) <= a.weight_at(g.kept1.kept.position(i)) + 1e-12);
    for (std::size_t j = 0; j < g.kept2.kept.size(); ++j)
        CHECK(g.kept2.kept.weight(j) <= b.weight_at(g.kept2.kept.position(j)) + 1e-12);
    CHECK(plan_cost(g.plan, a, b) == doctest::Approx(g.transport_cost));
}

}  // namespace

TEST_CASE("flat distance threshold between transport and removal") {
    auto d0 = DiscreteMeasure::dirac({0.0});
    const auto empty = generalized_wasserstein(d0, DiscreteMeasure(1));
    CHECK(empty.distance == 1.0);
    CHECK(empty.kept1.removed_mass == 1.0);
    CHECK(generalized_wasserstein(d0, DiscreteMeasure::dirac({3.0})).distance == 2.0);
    CHECK(generalized_wasserstein(d0, DiscreteMeasure::dirac({1.0})).distance == 1.0);
    CHECK(generalized_wasserstein(d0, DiscreteMeasure::dirac({1.5})).distance == 1.5);
    CHECK(generalized_wasserstein(d0, DiscreteMeasure::dirac({2.5})).distance == 2.0);
    CHECK_THROWS_AS(generalized_wasserstein(d0, DiscreteMeasure::dirac({0.0, 0.0})), DimensionMismatch);
}

TEST_CASE("flat distance matches exhaustive search") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t dim = 1 + trial % 2;
        auto a = oracle::random_quarter_measure(rng, dim, 3, -2, 2);
        auto b = oracle::random_quarter_measure(rng, dim, 3, -2, 2);
        const auto g = generalized_wasserstein(a, b);
        CHECK(g.distance == doctest::Approx(oracle::brute_force_flat(a, b)).epsilon(1e-7));
        check_witness(g, a, b);
    }
}

TEST_CASE("flat distance inequalities") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 60; ++trial) {
        auto a = oracle::random_measure(rng, 2, 8, -2, 2);
        auto b = oracle::random_measure(rng, 2, 8, -2, 2);
        auto c = oracle::random_measure(rng, 2, 8, -2, 2);
        const double ab = generalized_wasserstein(a, b).distance;
        CHECK(std::abs(a.mass() - b.mass()) <= ab + 1e-9);
        CHECK(ab <= a.mass() + b.mass() + 1e-9);
        CHECK(std::abs(ab - generalized_wasserstein(b, a).distance) <= 1e-9);
        CHECK(generalized_wasserstein(a, c).distance <=
              ab + generalized_wasserstein(b, c).distance + 1e-9);
        CHECK(generalized_wasserstein(a, a).distance == 0.0);
        CHECK(generalized_wasserstein(a, DiscreteMeasure(2)).distance == doctest::Approx(a.mass()));
        auto [p, q] = oracle::random_balanced_pair(rng, 2, 8, -2, 2);
        CHECK(generalized_wasserstein(p, q).distance <= wasserstein1(p, q).distance + 1e-9);
    }
}

TEST_CASE("line-graph formulation agrees with the bipartite network") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = oracle::random_measure(rng, 1, 40, -6, 6);
        auto b = oracle::random_measure(rng, 1, 40, -6, 6);
        TransportOptions line;
        line.dense_pair_limit = 1;
        const auto dense = generalized_wasserstein(a, b);
        const auto sparse = generalized_wasserstein(a, b, line);
        CHECK(sparse.distance == doctest::Approx(dense.distance).epsilon(1e-9));
        check_witness(sparse, a, b);
    }
}

TEST_CASE("dual probes") {
    auto d0 = DiscreteMeasure::dirac({0.0}), d1 = DiscreteMeasure::dirac({1.0});
    auto mu = DiscreteMeasure::from_atoms(1, {{{0.0}, 0.5}, {{1.0}, 0.75}});
    auto one = [](std::span<const double>) { return 1.0; };
    const auto p = gw_dual_probe(mu, DiscreteMeasure(1), one);
    CHECK(p.admissible);
    CHECK(p.value == doctest::Approx(generalized_wasserstein(mu, DiscreteMeasure(1)).distance));
    CHECK(gw_dual_probe(d0, d1, [](std::span<const double>) { return 0.0; }).value == 0.0);
    const auto clip = gw_dual_probe(d0, d1, [](std::span<const double> x) { return std::clamp(x[0], -1.0, 1.0); });
    CHECK(clip.admissible);
    CHECK(std::abs(clip.value) == doctest::Approx(generalized_wasserstein(d0, d1).distance));
    CHECK_FALSE(gw_dual_probe(d0, d1, [](std::span<const double>) { return 2.0; }).admissible);

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        auto a = oracle::random_measure(rng, 2, 6, -2, 2);
        auto b = oracle::random_measure(rng, 2, 6, -2, 2);
        auto f = [](std::span<const double> x) { return std::clamp(std::sin(x[0]) * 0.7 + 0.2 * x[1], -1.0, 1.0); };
        const auto probe = gw_dual_probe(a, b, f);
        CHECK(probe.admissible);
        CHECK(probe.value <= generalized_wasserstein(a, b).distance + 1e-9);
    }
}

TEST_CASE("integral bound holds for random smooth functions") {
    std::mt19937_64 rng(64);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    auto c = [](std::span<const double>) { return 0.7; };
    auto d0 = DiscreteMeasure::dirac({0.0}), d1 = DiscreteMeasure::dirac({1.0});
    CHECK(integral_bound_check(c, d0, DiscreteMeasure::dirac({5.0}, 0.2)));
    CHECK(integral_bound_check([](std::span<const double> x) { return x[0]; }, d0, d1));
    for (int trial = 0; trial < 100; ++trial) {
        const double a0 = coef(rng), a1 = coef(rng), a2 = coef(rng);
        auto f = [=](std::span<const double> x) { return a0 * std::sin(a1 * x[0]) + a2 * std::cos(x[1]); };
        auto a = oracle::random_measure(rng, 2, 6, -2, 2);
        auto b = oracle::random_measure(rng, 2, 6, -2, 2);
        CHECK(integral_bound_check(f, a, b));
    }
}
