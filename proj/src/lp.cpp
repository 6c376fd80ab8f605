#include "dyncontract/lp.hpp"

#include "dyncontract/game.hpp"

#include <algorithm>
#include <cmath>

namespace dyncontract {

LinearProgram::LinearProgram(std::size_t num_vars) : n_(num_vars), c_(num_vars, 0.0) {}

void LinearProgram::set_objective(std::vector<double> c) {
    if (c.size() != n_) throw InvalidInput("objective length mismatch");
    c_ = std::move(c);
}

std::size_t LinearProgram::add_row(std::vector<double> coeffs, Sense sense, double rhs) {
    if (coeffs.size() != n_) throw InvalidInput("row length mismatch");
    rows_.push_back(Row{std::move(coeffs), sense, rhs});
    return rows_.size() - 1;
}

namespace {

class Tableau {
public:
    Tableau(std::size_t m, std::size_t cols) : m_(m), cols_(cols), t_((m + 1) * (cols + 1), 0.0) {}

    double& at(std::size_t i, std::size_t j) { return t_[i * (cols_ + 1) + j]; }
    double at(std::size_t i, std::size_t j) const { return t_[i * (cols_ + 1) + j]; }
    double& rhs(std::size_t i) { return at(i, cols_); }
    double& obj(std::size_t j) { return at(m_, j); }

    void pivot(std::size_t r, std::size_t e) {
        const std::size_t w = cols_ + 1;
        double* pr = &t_[r * w];
        const double inv = 1.0 / pr[e];
        for (std::size_t j = 0; j < w; ++j) pr[j] *= inv;
        pr[e] = 1.0;
        for (std::size_t i = 0; i <= m_; ++i) {
            if (i == r) continue;
            double* pi = &t_[i * w];
            const double f = pi[e];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < w; ++j) pi[j] -= f * pr[j];
            pi[e] = 0.0;
        }
    }

private:
    std::size_t m_;
    std::size_t cols_;
    std::vector<double> t_;
};

constexpr double kPivTol = 1e-11;

}  // namespace

LpResult LinearProgram::maximize() const {
    const std::size_t m = rows_.size();
    const std::size_t n = n_;

    // column layout: structural | slack or surplus | artificial
    std::vector<int> slack_col(m, -1), art_col(m, -1);
    std::size_t cols = n;
    for (std::size_t i = 0; i < m; ++i)
        if (rows_[i].sense != Sense::eq) slack_col[i] = int(cols++);
    const std::size_t first_art = cols;
    std::vector<double> sign(m, 1.0);
    std::vector<Sense> sense(m);
    for (std::size_t i = 0; i < m; ++i) {
        sense[i] = rows_[i].sense;
        if (rows_[i].rhs < 0.0) {
            sign[i] = -1.0;
            if (sense[i] == Sense::le) sense[i] = Sense::ge;
            else if (sense[i] == Sense::ge) sense[i] = Sense::le;
        }
        if (sense[i] != Sense::le) art_col[i] = int(cols++);
    }

    Tableau T(m, cols);
    std::vector<std::size_t> basis(m), init_col(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) T.at(i, j) = sign[i] * rows_[i].a[j];
        T.rhs(i) = sign[i] * rows_[i].rhs;
        if (slack_col[i] >= 0) T.at(i, std::size_t(slack_col[i])) = (sense[i] == Sense::le ? 1.0 : -1.0);
        if (art_col[i] >= 0) T.at(i, std::size_t(art_col[i])) = 1.0;
        basis[i] = art_col[i] >= 0 ? std::size_t(art_col[i]) : std::size_t(slack_col[i]);
        init_col[i] = basis[i];
    }

    LpResult result;
    const std::size_t max_pivots = 50 * (m + cols) + 1000;

    auto ratio_row = [&](std::size_t e) -> long {
        long best = -1;
        double best_ratio = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double a = T.at(i, e);
            if (a <= kPivTol) continue;
            const double ratio = T.at(i, cols) / a;
            if (best < 0) {
                best = long(i);
                best_ratio = ratio;
                continue;
            }
            const double tol = 1e-12 * (1.0 + std::abs(best_ratio));
            if (ratio < best_ratio - tol) {
                best = long(i);
                best_ratio = ratio;
            } else if (ratio <= best_ratio + tol) {
                // lexicographic tie-break on rows of the basis inverse
                const double ab = T.at(std::size_t(best), e);
                for (std::size_t k = 0; k < m; ++k) {
                    const double x = T.at(i, init_col[k]) / a;
                    const double y = T.at(std::size_t(best), init_col[k]) / ab;
                    if (x < y - 1e-14) {
                        best = long(i);
                        best_ratio = ratio;
                        break;
                    }
                    if (x > y + 1e-14) break;
                }
            }
        }
        return best;
    };

    auto run = [&](std::size_t allowed_cols, double opt_tol) -> LpStatus {
        while (true) {
            std::size_t e = allowed_cols;
            double best = opt_tol;
            for (std::size_t j = 0; j < allowed_cols; ++j) {
                if (T.obj(j) > best) {
                    best = T.obj(j);
                    e = j;
                }
            }
            if (e == allowed_cols) return LpStatus::optimal;
            long r = ratio_row(e);
            if (r < 0) return LpStatus::unbounded;
            T.pivot(std::size_t(r), e);
            basis[std::size_t(r)] = e;
            if (++result.pivots > int(max_pivots)) throw Error("simplex pivot limit exceeded");
        }
    };

    // phase one: maximize minus the sum of artificials
    bool has_art = first_art < cols;
    if (has_art) {
        for (std::size_t j = 0; j <= cols; ++j) T.obj(j) = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (art_col[i] < 0) continue;
            for (std::size_t j = 0; j <= cols; ++j) T.obj(j) += T.at(i, j);
            T.obj(std::size_t(art_col[i])) = 0.0;
        }
        run(first_art, 1e-12);
        double infeas = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            if (basis[i] >= first_art) infeas += std::max(0.0, T.at(i, cols));
        if (infeas > kFeasTol) {
            result.status = LpStatus::infeasible;
            return result;
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (basis[i] < first_art) continue;
            std::size_t e = first_art;
            double best = 1e-9;
            for (std::size_t j = 0; j < first_art; ++j) {
                if (std::abs(T.at(i, j)) > best) {
                    best = std::abs(T.at(i, j));
                    e = j;
                }
            }
            if (e < first_art) {
                T.pivot(i, e);
                basis[i] = e;
            }
        }
    }

    // phase two
    double cmax = 0.0;
    for (double c : c_) cmax = std::max(cmax, std::abs(c));
    for (std::size_t j = 0; j <= cols; ++j) T.obj(j) = 0.0;
    for (std::size_t j = 0; j < n; ++j) T.obj(j) = c_[j];
    for (std::size_t i = 0; i < m; ++i) {
        const double cb = basis[i] < n ? c_[basis[i]] : 0.0;
        if (cb == 0.0) continue;
        for (std::size_t j = 0; j <= cols; ++j) T.obj(j) -= cb * T.at(i, j);
    }
    LpStatus st = run(first_art, 1e-13 * (1.0 + cmax));
    result.status = st;
    if (st != LpStatus::optimal) return result;

    result.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n) result.x[basis[i]] = std::max(0.0, T.at(i, cols));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += c_[j] * result.x[j];
    result.objective = z;
    return result;
}

}  // namespace dyncontract
