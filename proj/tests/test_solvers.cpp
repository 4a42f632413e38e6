#include <random>

#include "doctest.h"
#include "measureflow/errors.hpp"
#include "measureflow/network_simplex.hpp"
#include "measureflow/simplex_lp.hpp"

using namespace mflow;

TEST_CASE("network simplex on a small transportation problem") {
    // Two sources, two sinks; optimal flow is the diagonal.
    std::vector<FlowArc> arcs{{0, 2, 1.0}, {0, 3, 4.0}, {1, 2, 3.0}, {1, 3, 1.0}};
    auto sol = min_cost_flow(4, arcs, {1.0, 2.0, -1.0, -2.0});
    CHECK(sol.cost == doctest::Approx(3.0));
    CHECK(sol.flow[0] == doctest::Approx(1.0));
    CHECK(sol.flow[3] == doctest::Approx(2.0));
}

TEST_CASE("network simplex routes through transshipment nodes") {
    std::vector<FlowArc> arcs{{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 5.0}};
    auto sol = min_cost_flow(3, arcs, {1.0, 0.0, -1.0});
    CHECK(sol.cost == doctest::Approx(2.0));
}

TEST_CASE("network simplex reports infeasible and unbalanced networks") {
    std::vector<FlowArc> arcs{{1, 0, 1.0}};
    CHECK_THROWS_AS(min_cost_flow(2, arcs, {1.0, -1.0}), SolverError);
    CHECK_THROWS_AS(min_cost_flow(2, arcs, {1.0, -0.5}), std::invalid_argument);
}

TEST_CASE("pivot rules agree on random transportation problems") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> c(0.0, 10.0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t na = 2 + trial % 7, nb = 3 + trial % 5;
        std::vector<FlowArc> arcs;
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t j = 0; j < nb; ++j) arcs.push_back({i, na + j, std::round(c(rng))});
        std::vector<double> supply(na + nb, 0.0);
        for (std::size_t i = 0; i < na; ++i) supply[i] = static_cast<double>(nb);
        for (std::size_t j = 0; j < nb; ++j) supply[na + j] = -static_cast<double>(na);
        const auto a = min_cost_flow(na + nb, arcs, supply, PivotRule::bland);
        const auto b = min_cost_flow(na + nb, arcs, supply, PivotRule::block_search);
        CHECK(a.cost == doctest::Approx(b.cost));

        // Same problem as a dense LP.
        LinearProgram lp;
        lp.variables = arcs.size();
        for (const auto& e : arcs) lp.objective.push_back(e.cost);
        for (std::size_t i = 0; i < na; ++i) {
            std::vector<std::pair<std::size_t, double>> t;
            for (std::size_t j = 0; j < nb; ++j) t.push_back({i * nb + j, 1.0});
            lp.add_row(t, RowSense::equal, supply[i]);
        }
        for (std::size_t j = 0; j < nb; ++j) {
            std::vector<std::pair<std::size_t, double>> t;
            for (std::size_t i = 0; i < na; ++i) t.push_back({i * nb + j, 1.0});
            lp.add_row(t, RowSense::equal, -supply[na + j]);
        }
        const auto lps = solve_lp(lp);
        REQUIRE(lps.status == LpStatus::optimal);
        CHECK(lps.objective == doctest::Approx(a.cost));
    }
}

TEST_CASE("dense simplex handles inequality forms") {
    // max x + y s.t. x + 2y <= 4, 3x + y <= 6  ->  min -(x + y)
    LinearProgram lp;
    lp.variables = 2;
    lp.objective = {-1.0, -1.0};
    lp.add_row({{0, 1.0}, {1, 2.0}}, RowSense::less_equal, 4.0);
    lp.add_row({{0, 3.0}, {1, 1.0}}, RowSense::less_equal, 6.0);
    auto s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.objective == doctest::Approx(-2.8));

    LinearProgram inf;
    inf.variables = 1;
    inf.objective = {1.0};
    inf.add_row({{0, 1.0}}, RowSense::greater_equal, 2.0);
    inf.add_row({{0, 1.0}}, RowSense::less_equal, 1.0);
    CHECK(solve_lp(inf).status == LpStatus::infeasible);

    LinearProgram unb;
    unb.variables = 1;
    unb.objective = {-1.0};
    unb.add_row({{0, 1.0}}, RowSense::greater_equal, 1.0);
    CHECK(solve_lp(unb).status == LpStatus::unbounded);
}

TEST_CASE("lexicographic solve picks the best secondary among primary optima") {
    // x0 + x1 = 1; primary indifferent, secondary prefers x1.
    LinearProgram lp;
    lp.variables = 3;
    lp.objective = {1.0, 1.0, 2.0};
    lp.add_row({{0, 1.0}, {1, 1.0}, {2, 1.0}}, RowSense::equal, 1.0);
    auto s = solve_lp_lexicographic(lp, {5.0, 1.0, 0.0}, [](double) { return 0.0; });
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.primary == doctest::Approx(1.0));
    CHECK(s.secondary == doctest::Approx(1.0));
    CHECK(s.x[1] == doctest::Approx(1.0));

    // With slack 1 the secondary may trade primary cost: x2 becomes admissible.
    auto t = solve_lp_lexicographic(lp, {5.0, 1.0, 0.0}, [](double) { return 1.0; });
    CHECK(t.secondary == doctest::Approx(0.0));
}
