#include "measureflow/simplex_lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "measureflow/errors.hpp"

namespace mflow {

namespace {

constexpr double kPivotTol = 1e-10;
constexpr double kCostTol = 1e-10;
constexpr double kFeasTol = 1e-8;
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

/// Dense canonical tableau. Row `rows_ - 1` is reserved for the optimality row
/// appended by the lexicographic solve; until then it is the identity row of
/// its own slack column with rhs 0.
class Tableau {
public:
    Tableau(const LinearProgram& lp) {
        const std::size_t n = lp.variables;
        if (lp.objective.size() != n) throw std::invalid_argument("objective size must equal variable count");
        const std::size_t m = lp.rows.size();

        // Row normalization: rhs >= 0.
        std::vector<RowSense> sense(m);
        std::vector<double> sign(m, 1.0);
        for (std::size_t r = 0; r < m; ++r) {
            sense[r] = lp.rows[r].sense;
            if (lp.rows[r].rhs < 0.0) {
                sign[r] = -1.0;
                if (sense[r] == RowSense::less_equal)
                    sense[r] = RowSense::greater_equal;
                else if (sense[r] == RowSense::greater_equal)
                    sense[r] = RowSense::less_equal;
            }
        }
        std::size_t slacks = 0, artificials = 0;
        for (auto s : sense) {
            if (s != RowSense::equal) ++slacks;
            if (s != RowSense::less_equal) ++artificials;
        }
        structural_ = n;
        art_begin_ = n + slacks;
        extra_col_ = art_begin_ + artificials;
        cols_ = extra_col_ + 1;
        rows_ = m + 1;
        width_ = cols_ + 1;
        a_.assign(rows_ * width_, 0.0);
        basis_.assign(rows_, kNone);
        allowed_.assign(cols_, 1);
        allowed_[extra_col_] = 0;

        std::size_t next_slack = n, next_art = art_begin_;
        for (std::size_t r = 0; r < m; ++r) {
            for (const auto& [j, v] : lp.rows[r].terms) {
                if (j >= n) throw std::out_of_range("LP term refers to unknown variable");
                at(r, j) += sign[r] * v;
            }
            rhs(r) = sign[r] * lp.rows[r].rhs;
            switch (sense[r]) {
                case RowSense::less_equal:
                    at(r, next_slack) = 1.0;
                    basis_[r] = next_slack++;
                    break;
                case RowSense::greater_equal:
                    at(r, next_slack++) = -1.0;
                    at(r, next_art) = 1.0;
                    basis_[r] = next_art++;
                    break;
                case RowSense::equal:
                    at(r, next_art) = 1.0;
                    basis_[r] = next_art++;
                    break;
            }
        }
        at(m, extra_col_) = 1.0;
        basis_[m] = extra_col_;
        z_.assign(width_, 0.0);
    }

    double& at(std::size_t r, std::size_t j) { return a_[r * width_ + j]; }
    double at(std::size_t r, std::size_t j) const { return a_[r * width_ + j]; }
    double& rhs(std::size_t r) { return a_[r * width_ + cols_]; }

    void set_objective(const std::vector<double>& c) {
        std::fill(z_.begin(), z_.end(), 0.0);
        for (std::size_t j = 0; j < c.size(); ++j) z_[j] = c[j];
        for (std::size_t r = 0; r < rows_; ++r) {
            const double cb = basis_[r] < c.size() ? c[basis_[r]] : 0.0;
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j < width_; ++j) z_[j] -= cb * at(r, j);
        }
    }

    LpStatus optimize() {
        for (;;) {
            std::size_t enter = kNone;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (allowed_[j] && z_[j] < -kCostTol) {
                    enter = j;
                    break;
                }
            }
            if (enter == kNone) return LpStatus::optimal;
            std::size_t leave = kNone;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < rows_; ++r) {
                const double v = at(r, enter);
                if (v <= kPivotTol) continue;
                const double ratio = rhs(r) / v;
                if (leave == kNone) {
                    best = ratio;
                    leave = r;
                    continue;
                }
                const double tie = 1e-12 * (1.0 + std::abs(best));
                if (ratio < best - tie || (ratio <= best + tie && basis_[r] < basis_[leave])) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave == kNone) return LpStatus::unbounded;
            pivot(leave, enter);
        }
    }

    void pivot(std::size_t r, std::size_t j) {
        double* row = &a_[r * width_];
        const double p = row[j];
        for (std::size_t k = 0; k < width_; ++k) row[k] /= p;
        row[j] = 1.0;
        for (std::size_t s = 0; s < rows_; ++s) {
            if (s == r) continue;
            double* other = &a_[s * width_];
            const double f = other[j];
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < width_; ++k) other[k] -= f * row[k];
            other[j] = 0.0;
        }
        const double f = z_[j];
        if (f != 0.0) {
            for (std::size_t k = 0; k < width_; ++k) z_[k] -= f * row[k];
            z_[j] = 0.0;
        }
        basis_[r] = j;
    }

    /// Phase 1. Returns false when the program is infeasible.
    bool find_feasible() {
        if (art_begin_ == extra_col_) return true;
        std::vector<double> c(cols_, 0.0);
        for (std::size_t j = art_begin_; j < extra_col_; ++j) c[j] = 1.0;
        set_objective(c);
        optimize();
        double infeas = 0.0, scale = 1.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            scale = std::max(scale, std::abs(rhs(r)));
            if (basis_[r] >= art_begin_ && basis_[r] < extra_col_) infeas += rhs(r);
        }
        if (infeas > kFeasTol * scale) return false;
        // Drive remaining (zero-valued) artificials out; rows where that is
        // impossible are redundant and get cleared.
        for (std::size_t r = 0; r < rows_; ++r) {
            if (basis_[r] < art_begin_ || basis_[r] >= extra_col_) continue;
            std::size_t col = kNone;
            double best = 1e-9;
            for (std::size_t j = 0; j < art_begin_; ++j) {
                if (std::abs(at(r, j)) > best) {
                    best = std::abs(at(r, j));
                    col = j;
                }
            }
            if (col != kNone) {
                rhs(r) = 0.0;
                pivot(r, col);
            } else {
                for (std::size_t j = 0; j < width_; ++j) at(r, j) = 0.0;
                at(r, basis_[r]) = 1.0;
            }
        }
        for (std::size_t j = art_begin_; j < extra_col_; ++j) allowed_[j] = 0;
        return true;
    }

    std::vector<double> primal() const {
        std::vector<double> x(structural_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r)
            if (basis_[r] < structural_) x[basis_[r]] = std::max(0.0, a_[r * width_ + cols_]);
        return x;
    }

    /// Overwrites the reserved row with sum_j z_j x_j + s = slack, i.e.
    /// objective(x) <= current optimum + slack.
    void append_objective_bound(double slack) {
        const std::size_t r = rows_ - 1;
        for (std::size_t j = 0; j < cols_; ++j) at(r, j) = allowed_[j] ? z_[j] : 0.0;
        for (std::size_t s = 0; s + 1 < rows_; ++s) at(r, basis_[s]) = 0.0;
        at(r, extra_col_) = 1.0;
        rhs(r) = slack;
        basis_[r] = extra_col_;
    }

private:
    std::size_t structural_ = 0, art_begin_ = 0, extra_col_ = 0;
    std::size_t rows_ = 0, cols_ = 0, width_ = 0;
    std::vector<double> a_;
    std::vector<std::size_t> basis_;
    std::vector<char> allowed_;
    std::vector<double> z_;
};

double dot(const std::vector<double>& c, const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += c[j] * x[j];
    return s;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
    Tableau t(lp);
    LpSolution out;
    if (!t.find_feasible()) {
        out.status = LpStatus::infeasible;
        return out;
    }
    t.set_objective(lp.objective);
    out.status = t.optimize();
    if (out.status != LpStatus::optimal) return out;
    out.x = t.primal();
    out.objective = dot(lp.objective, out.x);
    return out;
}

LexicographicSolution solve_lp_lexicographic(const LinearProgram& lp, const std::vector<double>& secondary,
                                             const std::function<double(double)>& slack) {
    if (secondary.size() != lp.variables) throw std::invalid_argument("secondary objective size mismatch");
    Tableau t(lp);
    LexicographicSolution out;
    if (!t.find_feasible()) return out;
    t.set_objective(lp.objective);
    out.status = t.optimize();
    if (out.status != LpStatus::optimal) return out;
    out.primary = dot(lp.objective, t.primal());
    out.slack = slack(out.primary);
    if (!(out.slack >= 0.0)) throw std::invalid_argument("optimality slack must be nonnegative");
    t.append_objective_bound(out.slack);
    t.set_objective(secondary);
    out.status = t.optimize();
    if (out.status != LpStatus::optimal) return out;
    out.x = t.primal();
    out.secondary = dot(secondary, out.x);
    return out;
}

}  // namespace mflow
