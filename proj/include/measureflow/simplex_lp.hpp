#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace mflow {

enum class RowSense { less_equal, equal, greater_equal };

/// min c.x subject to sparse rows and x >= 0.
struct LinearProgram {
    struct Row {
        std::vector<std::pair<std::size_t, double>> terms;
        RowSense sense = RowSense::less_equal;
        double rhs = 0.0;
    };

    std::size_t variables = 0;
    std::vector<double> objective;
    std::vector<Row> rows;

    std::size_t add_row(std::vector<std::pair<std::size_t, double>> terms, RowSense sense, double rhs) {
        rows.push_back({std::move(terms), sense, rhs});
        return rows.size() - 1;
    }
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    double objective = 0.0;
    std::vector<double> x;
};

/// Result of a two-level solve: primary optimum first, then the secondary
/// objective minimized over {x feasible : primary(x) <= primary* + slack}.
struct LexicographicSolution {
    LpStatus status = LpStatus::infeasible;
    double primary = 0.0;
    double secondary = 0.0;
    double slack = 0.0;
    std::vector<double> x;
};

/// Dense two-phase primal simplex with Bland's rule.
LpSolution solve_lp(const LinearProgram& lp);

/// Solves `lp` for its objective, then appends the row primary(x) <= primary* +
/// slack(primary*) expressed in the optimal basis and reoptimizes `secondary`
/// starting from that basis.
LexicographicSolution solve_lp_lexicographic(const LinearProgram& lp, const std::vector<double>& secondary,
                                             const std::function<double(double)>& slack);

}  // namespace mflow
