#pragma once

#include <cstddef>
#include <vector>

namespace dyncontract {

enum class Sense { le, ge, eq };

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    double objective = 0.0;
    std::vector<double> x;
    int pivots = 0;

    bool optimal() const { return status == LpStatus::optimal; }
};

/// Dense two-phase simplex for small row counts: maximize c'x s.t. rows, x >= 0.
/// Entering variable by largest reduced cost, leaving variable by the
/// lexicographic ratio rule, so the pivot path is fully deterministic.
class LinearProgram {
public:
    explicit LinearProgram(std::size_t num_vars);

    std::size_t num_vars() const { return n_; }
    std::size_t num_rows() const { return rows_.size(); }

    void set_objective(std::vector<double> c);
    void set_objective_coef(std::size_t j, double c) { c_.at(j) = c; }
    std::size_t add_row(std::vector<double> coeffs, Sense sense, double rhs);
    void set_rhs(std::size_t row, double rhs) { rows_.at(row).rhs = rhs; }

    LpResult maximize() const;

    static constexpr double kFeasTol = 1e-9;

private:
    struct Row {
        std::vector<double> a;
        Sense sense;
        double rhs;
    };
    std::size_t n_;
    std::vector<double> c_;
    std::vector<Row> rows_;
};

}  // namespace dyncontract
