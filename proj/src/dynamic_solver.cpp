#include "dyncontract/dynamic_solver.hpp"

#include "dyncontract/lp.hpp"
#include "dyncontract/piecewise.hpp"
#include "dyncontract/static_solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <thread>

namespace dyncontract {

// ---------------------------------------------------------------- grids

SolverConfig make_solver_config(const DiscountedGame& game, std::size_t belief_resolution, std::size_t promise_points,
                                const std::vector<double>& extra_promises) {
    const StageGame& stage = game.stage();
    const std::size_t n = stage.num_states();
    SolverConfig cfg;
    cfg.lattice_resolution = belief_resolution;

    std::vector<Belief> beliefs;
    if (belief_resolution > 0)
        for (auto& b : simplex_lattice(n, belief_resolution)) beliefs.push_back(std::move(b));
    for (std::size_t s = 0; s < n; ++s) beliefs.push_back(Belief::degenerate(n, s));
    beliefs.push_back(game.prior());
    if (game.chain().is_iid()) beliefs.push_back(game.chain().step(game.prior()));
    for (auto& b : extremal_beliefs(stage).beliefs) beliefs.push_back(std::move(b));
    sort_and_dedupe(beliefs, 1e-12);
    cfg.belief_grid = std::move(beliefs);

    const double C = game.promise_bound();
    const double lo = no_info_value(game, game.prior());
    const double hi = full_info_value(game, game.prior());
    std::vector<double> required{-C, C, 0.0, lo, -lo, hi, -hi};
    for (double e : extra_promises)
        if (e > -C && e < C) required.push_back(e);

    double core = 1.25 * std::max({std::abs(lo), std::abs(hi), stage.u_sup_norm(), 1e-6});
    core = std::min(core, 0.5 * C);
    std::vector<double> tails;
    const int tail_points = 3;
    for (int i = 1; i <= tail_points; ++i) {
        const double t = core * std::pow(C / core, double(i) / double(tail_points + 1));
        tails.push_back(t);
        tails.push_back(-t);
    }
    tails.push_back(core);
    tails.push_back(-core);

    std::vector<double> grid = required;
    grid.insert(grid.end(), tails.begin(), tails.end());
    auto dedupe = [&](std::vector<double>& g) {
        std::sort(g.begin(), g.end());
        std::vector<double> out;
        for (double x : g) {
            if (out.empty() || x - out.back() > 1e-12 * (1.0 + C)) out.push_back(x);
            else if (x == 0.0) out.back() = 0.0;
        }
        g = std::move(out);
    };
    dedupe(grid);
    const std::vector<double> base = grid;
    // fill the core evenly, skipping slots that crowd an existing knot
    for (std::size_t fill = promise_points > base.size() ? promise_points - base.size() : 0;
         grid.size() < promise_points && fill < 4 * promise_points; ++fill) {
        const double h = 2.0 * core / double(fill + 1);
        grid = base;
        for (std::size_t i = 1; i <= fill; ++i) {
            const double x = -core + h * double(i);
            if (std::none_of(base.begin(), base.end(), [&](double g) { return std::abs(g - x) < 0.25 * h; }))
                grid.push_back(x);
        }
        dedupe(grid);
    }
    cfg.promise_grid = std::move(grid);
    return cfg;
}

void validate_config(const DiscountedGame& game, const SolverConfig& cfg) {
    const std::size_t n = game.stage().num_states();
    if (cfg.belief_grid.empty() || cfg.promise_grid.size() < 2) throw InvalidInput("grids must be non-empty");
    for (const auto& b : cfg.belief_grid)
        if (b.size() != n) throw InvalidInput("belief grid dimension mismatch");
    auto on_grid = [&](const Belief& mu) {
        return std::any_of(cfg.belief_grid.begin(), cfg.belief_grid.end(), [&](const Belief& b) { return b.near(mu); });
    };
    if (!on_grid(game.prior())) throw InvalidInput("belief grid must contain the prior");
    for (std::size_t s = 0; s < n; ++s)
        if (!on_grid(Belief::degenerate(n, s))) throw InvalidInput("belief grid must contain every degenerate belief");
    for (const auto& b : extremal_beliefs(game.stage()).beliefs)
        if (!on_grid(b)) throw InvalidInput("belief grid must contain every extremal belief");
    if (game.chain().is_iid() && !on_grid(game.chain().step(game.prior())))
        throw InvalidInput("belief grid must contain the i.i.d. state law");
    if (!game.chain().is_iid() && n > 2 && cfg.lattice_resolution == 0)
        throw InvalidInput("non-i.i.d. chains need a lattice resolution");
    const auto& g = cfg.promise_grid;
    for (std::size_t i = 1; i < g.size(); ++i)
        if (!(g[i] > g[i - 1])) throw InvalidInput("promise grid must be strictly increasing");
    const double C = game.promise_bound();
    if (std::abs(g.front() + C) > 1e-9 * C || std::abs(g.back() - C) > 1e-9 * C)
        throw InvalidInput("promise grid must span [-C, C]");
    if (std::none_of(g.begin(), g.end(), [](double x) { return x == 0.0; }))
        throw InvalidInput("promise grid must contain 0");
    if (!(cfg.tolerance > 0.0) || cfg.max_iterations < 0) throw InvalidInput("bad tolerance or iteration budget");
}

// ---------------------------------------------------------------- surface

ValueSurface::ValueSurface(std::vector<Belief> beliefs, std::vector<double> promises,
                           std::vector<std::vector<double>> values)
    : beliefs_(std::move(beliefs)), promises_(std::move(promises)), values_(std::move(values)) {
    if (values_.size() != beliefs_.size()) throw InvalidInput("one value row per belief required");
    for (const auto& r : values_)
        if (r.size() != promises_.size()) throw InvalidInput("value row length mismatch");
}

ValueSurface ValueSurface::constant(const SolverConfig& config, double c) {
    return ValueSurface(config.belief_grid, config.promise_grid,
                        std::vector<std::vector<double>>(config.belief_grid.size(),
                                                         std::vector<double>(config.promise_grid.size(), c)));
}

std::size_t ValueSurface::belief_index(const Belief& mu, double tol) const {
    for (std::size_t i = 0; i < beliefs_.size(); ++i)
        if (beliefs_[i].near(mu, tol)) return i;
    throw OutOfRange("belief is not on the grid");
}

std::size_t ValueSurface::nearest_belief(const Belief& mu) const {
    std::size_t best = 0;
    double d = INFINITY;
    for (std::size_t i = 0; i < beliefs_.size(); ++i) {
        const double e = (beliefs_[i].probabilities() - mu.probabilities()).lpNorm<1>();
        if (e < d - 1e-15) {
            d = e;
            best = i;
        }
    }
    return best;
}

std::size_t ValueSurface::nearest_promise(double u) const {
    auto it = std::lower_bound(promises_.begin(), promises_.end(), u);
    if (it == promises_.begin()) return 0;
    if (it == promises_.end()) return promises_.size() - 1;
    const std::size_t hi = std::size_t(it - promises_.begin());
    return (u - promises_[hi - 1] <= promises_[hi] - u) ? hi - 1 : hi;
}

double ValueSurface::evaluate(std::size_t b, double u) const { return interpolate(promises_, values_.at(b), u); }

double ValueSurface::sup_distance(const ValueSurface& other) const {
    double d = 0.0;
    for (std::size_t b = 0; b < values_.size(); ++b)
        for (std::size_t p = 0; p < promises_.size(); ++p) {
            const double x = values_[b][p], y = other.values_.at(b).at(p);
            if (std::isinf(x) && std::isinf(y) && (x < 0) == (y < 0)) continue;
            d = std::max(d, std::abs(x - y));
        }
    return d;
}

double right_derivative(const ValueSurface& V, double u, const Belief& belief) {
    const std::size_t b = V.belief_index(belief);
    const auto& x = V.promises();
    const auto& y = V.row(b);
    const std::size_t m = right_segment(x, u);
    if (!std::isfinite(y[m]) || !std::isfinite(y[m + 1])) return -INFINITY;
    return (y[m + 1] - y[m]) / (x[m + 1] - x[m]);
}

// ---------------------------------------------------------------- operator internals

namespace {

struct PsiKnot {
    double x = 0.0;
    double value = 0.0;
    double tau = 0.0;  // (1 - delta) * transfer
    double uprime = 0.0;
};

// Value of delivering x = (1-delta) t + delta u' to the Receiver, maximized over
// the split between transfer and promise, for a concave continuation f.
std::vector<PsiKnot> build_psi(const std::vector<double>& u, const std::vector<double>& f, double delta, double k,
                               double C, bool allow_transfers) {
    std::vector<PsiKnot> out;
    if (delta == 0.0) {
        out.push_back({0.0, 0.0, 0.0, 0.0});
        if (allow_transfers) out.push_back({C, -k * C, C, C});
        return out;
    }
    const auto env = upper_concave_envelope(u, f);
    std::size_t lo = 0;
    while (lo < env.size() && !std::isfinite(env[lo])) ++lo;
    if (lo == env.size()) return out;
    std::size_t hi = lo;
    while (hi + 1 < env.size() && std::isfinite(env[hi + 1])) ++hi;

    PsiKnot cur{delta * u[lo], delta * env[lo], 0.0, u[lo]};
    out.push_back(cur);
    std::size_t m = lo;
    auto advance = [&](std::size_t seg) {
        cur.x += delta * (u[seg + 1] - u[seg]);
        cur.value += delta * (env[seg + 1] - env[seg]);
        cur.uprime = u[seg + 1];
        out.push_back(cur);
    };
    while (m < hi && (env[m + 1] - env[m]) / (u[m + 1] - u[m]) >= -k - 1e-12) advance(m++);
    if (allow_transfers) {
        cur.x += C;
        cur.value -= k * C;
        cur.tau = C;
        out.push_back(cur);
    }
    while (m < hi) advance(m++);
    return out;
}

PsiKnot psi_at(const std::vector<PsiKnot>& psi, double x) {
    if (x <= psi.front().x) return psi.front();
    for (std::size_t i = 0; i + 1 < psi.size(); ++i) {
        if (x <= psi[i + 1].x) {
            const double w = (x - psi[i].x) / (psi[i + 1].x - psi[i].x);
            auto lerp = [&](double a, double b) { return a + w * (b - a); };
            return {x, lerp(psi[i].value, psi[i + 1].value), lerp(psi[i].tau, psi[i + 1].tau),
                    lerp(psi[i].uprime, psi[i + 1].uprime)};
        }
    }
    return psi.back();
}

using Weights = std::vector<std::pair<std::size_t, double>>;

struct Continuation {
    Weights weights;  // grid beliefs and barycentric weights for tomorrow's prior
    double spread = 0.0;
};

class BeliefLocator {
public:
    BeliefLocator(const std::vector<Belief>& grid, std::size_t resolution) : grid_(grid), resolution_(resolution) {
        const std::size_t n = grid.front().size();
        if (n >= 3 && resolution > 0) {
            for (std::size_t i = 0; i < grid.size(); ++i) {
                std::vector<long> z(n);
                bool lattice = true;
                for (std::size_t s = 0; s < n; ++s) {
                    const double q = grid[i][s] * double(resolution);
                    z[s] = std::lround(q);
                    if (std::abs(q - double(z[s])) > 1e-9) lattice = false;
                }
                if (lattice) lattice_.emplace(z, i);
            }
        }
    }

    Continuation locate(const Belief& mu) const {
        for (std::size_t i = 0; i < grid_.size(); ++i)
            if (grid_[i].near(mu, 1e-12)) return {{{i, 1.0}}, 0.0};
        if (mu.size() == 2) return locate_line(mu);
        return locate_kuhn(mu);
    }

private:
    Continuation locate_line(const Belief& mu) const {
        std::size_t below = grid_.size(), above = grid_.size();
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            if (grid_[i][1] <= mu[1] && (below == grid_.size() || grid_[i][1] > grid_[below][1])) below = i;
            if (grid_[i][1] >= mu[1] && (above == grid_.size() || grid_[i][1] < grid_[above][1])) above = i;
        }
        const double a = grid_[below][1], b = grid_[above][1];
        if (below == above || b - a <= 0.0) return {{{below, 1.0}}, std::abs(a - mu[1])};
        const double w = (mu[1] - a) / (b - a);
        return {{{below, 1.0 - w}, {above, w}}, std::max(mu[1] - a, b - mu[1])};
    }

    Continuation locate_kuhn(const Belief& mu) const {
        const std::size_t n = mu.size();
        const long N = long(resolution_);
        if (N <= 0) throw InvalidInput("lattice resolution required for interpolation");
        std::vector<double> w(n - 1);
        for (std::size_t k = 0; k + 1 < n; ++k) {
            double tail = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) tail += mu[i];
            w[k] = double(N) * tail;
        }
        std::vector<long> f(n - 1);
        std::vector<double> r(n - 1);
        for (std::size_t k = 0; k + 1 < n; ++k) {
            f[k] = std::clamp(long(std::floor(w[k])), 0L, N - 1);
            r[k] = std::clamp(w[k] - double(f[k]), 0.0, 1.0);
        }
        std::vector<std::size_t> order(n - 1);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });

        Continuation c;
        std::vector<long> vert = f;
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) ++vert[order[i - 1]];
            double lambda;
            if (i == 0) lambda = 1.0 - r[order[0]];
            else if (i + 1 < n) lambda = r[order[i - 1]] - r[order[i]];
            else lambda = r[order[i - 1]];
            if (lambda <= 1e-15) continue;
            std::vector<long> z(n);
            z[0] = N - vert[0];
            for (std::size_t s = 1; s + 1 < n; ++s) z[s] = vert[s - 1] - vert[s];
            z[n - 1] = vert[n - 2];
            auto it = lattice_.find(z);
            if (it == lattice_.end()) throw InvalidInput("lattice vertex missing from the belief grid");
            c.weights.emplace_back(it->second, lambda);
            c.spread = std::max(c.spread, grid_[it->second].sup_distance(mu));
        }
        return c;
    }

    const std::vector<Belief>& grid_;
    std::size_t resolution_;
    std::map<std::vector<long>, std::size_t> lattice_;
};

struct AtomSpec {
    std::size_t belief = 0;
    std::size_t action = 0;
    double eu = 0.0;
    double ev = 0.0;
    double lower = 0.0;  // smallest delivery x satisfying obedience
    std::size_t cont = 0;
};

struct Column {
    std::size_t atom = 0;
    PsiKnot knot;
    double objective = 0.0;
    double pk = 0.0;
};

class Operator {
public:
    Operator(const DiscountedGame& game, const SolverConfig& cfg, bool degenerate_only)
        : game_(game), cfg_(cfg), locator_(cfg.belief_grid, cfg.lattice_resolution) {
        const StageGame& st = game.stage();
        const double d = game.discount();
        std::map<Weights, std::size_t> seen;
        for (std::size_t j = 0; j < cfg.belief_grid.size(); ++j) {
            const Belief& mu = cfg.belief_grid[j];
            const Belief next = game.chain().step(mu);
            Continuation c = locator_.locate(next);
            spread_ = std::max(spread_, c.spread);
            auto [it, inserted] = seen.emplace(c.weights, conts_.size());
            if (inserted) conts_.push_back(c);
            const std::size_t cid = it->second;
            for (const auto& [idx, w] : c.weights) active_.push_back(idx);

            if (degenerate_only && !mu.is_degenerate()) continue;
            const double ustar = myopic_receiver_value(st, mu);
            const double outside = d * no_info_value(game, next);
            for (std::size_t a = 0; a < st.num_actions(); ++a) {
                AtomSpec at;
                at.belief = j;
                at.action = a;
                at.eu = expected_payoff(st, mu, a, Side::receiver);
                at.ev = expected_payoff(st, mu, a, Side::sender);
                at.lower = (1.0 - d) * std::max(0.0, ustar - at.eu) + outside;
                at.cont = cid;
                atoms_.push_back(at);
            }
        }
        std::sort(active_.begin(), active_.end());
        active_.erase(std::unique(active_.begin(), active_.end()), active_.end());
    }

    const std::vector<std::size_t>& active_rows() const { return active_; }
    double spread() const { return spread_; }

    std::vector<double> continuation(const ValueSurface& V, std::size_t cid) const {
        const auto& ws = conts_.at(cid).weights;
        std::vector<double> f(cfg_.promise_grid.size(), 0.0);
        for (const auto& [idx, w] : ws) {
            const auto& row = V.row(idx);
            for (std::size_t p = 0; p < f.size(); ++p) f[p] = std::isfinite(row[p]) ? f[p] + w * row[p] : -INFINITY;
        }
        return f;
    }

    std::vector<std::vector<PsiKnot>> psis(const ValueSurface& V, bool allow_transfers) const {
        std::vector<std::vector<PsiKnot>> out;
        for (std::size_t c = 0; c < conts_.size(); ++c)
            out.push_back(build_psi(cfg_.promise_grid, continuation(V, c), game_.discount(), game_.k(),
                                    game_.promise_bound(), allow_transfers));
        return out;
    }

    void add_columns(const std::vector<std::vector<PsiKnot>>& psi, std::vector<Column>& cols) const {
        const double d = game_.discount();
        for (std::size_t j = 0; j < atoms_.size(); ++j) {
            const AtomSpec& at = atoms_[j];
            const auto& ps = psi[at.cont];
            if (ps.empty() || at.lower > ps.back().x + 1e-12) continue;
            auto push = [&](PsiKnot kn) {
                if (d == 0.0) kn.uprime = kn.x > 0.0 ? game_.promise_bound() : 0.0;
                Column c{j, kn, (1.0 - d) * at.ev + kn.value, (1.0 - d) * at.eu + kn.x};
                cols.push_back(c);
            };
            if (at.lower > ps.front().x) {
                push(psi_at(ps, at.lower));
                for (const auto& kn : ps)
                    if (kn.x > at.lower + 1e-12) push(kn);
            } else {
                for (const auto& kn : ps) push(kn);
            }
        }
    }

    std::vector<Column> columns(const ValueSurface& V) const {
        std::vector<Column> cols;
        add_columns(psis(V, true), cols);
        return cols;
    }

    LinearProgram program(const std::vector<Column>& cols) const {
        const std::size_t n = game_.stage().num_states();
        LinearProgram lp(cols.size());
        std::vector<double> obj(cols.size());
        for (std::size_t i = 0; i < cols.size(); ++i) obj[i] = cols[i].objective;
        lp.set_objective(std::move(obj));
        for (std::size_t s = 0; s < n; ++s) {
            std::vector<double> row(cols.size());
            for (std::size_t i = 0; i < cols.size(); ++i) row[i] = cfg_.belief_grid[atoms_[cols[i].atom].belief][s];
            lp.add_row(std::move(row), Sense::eq, 0.0);
        }
        std::vector<double> pk(cols.size());
        for (std::size_t i = 0; i < cols.size(); ++i) pk[i] = cols[i].pk;
        lp.add_row(std::move(pk), Sense::ge, 0.0);
        return lp;
    }

    // Solves the point (b, p); returns -inf when infeasible.
    double solve_point(LinearProgram& lp, const std::vector<Column>& cols, std::size_t b, std::size_t p,
                       std::vector<ContractAtom>* atoms) const {
        const std::size_t n = game_.stage().num_states();
        const Belief& mu = cfg_.belief_grid[b];
        for (std::size_t s = 0; s < n; ++s) lp.set_rhs(s, mu[s]);
        lp.set_rhs(n, cfg_.promise_grid[p]);
        LpResult res = lp.maximize();
        if (!res.optimal()) return -INFINITY;
        if (atoms) {
            const double d = game_.discount();
            double total = 0.0;
            for (std::size_t i = 0; i < cols.size(); ++i)
                if (res.x[i] > 1e-12) total += res.x[i];
            for (std::size_t i = 0; i < cols.size(); ++i) {
                if (res.x[i] <= 1e-12) continue;
                const AtomSpec& at = atoms_[cols[i].atom];
                ContractAtom ca;
                ca.belief = cfg_.belief_grid[at.belief];
                ca.action = at.action;
                ca.transfer = cols[i].knot.tau <= 1e-14 ? 0.0 : cols[i].knot.tau / (1.0 - d);
                ca.promise = std::clamp(cols[i].knot.uprime, -game_.promise_bound(), game_.promise_bound());
                ca.weight = res.x[i] / total;
                atoms->push_back(std::move(ca));
            }
        }
        return res.objective;
    }

    std::vector<double> solve_row(const std::vector<Column>& cols, std::size_t b,
                                  std::vector<std::vector<ContractAtom>>* policy_row) const {
        LinearProgram lp = program(cols);
        std::vector<double> values(cfg_.promise_grid.size());
        for (std::size_t p = 0; p < values.size(); ++p)
            values[p] = solve_point(lp, cols, b, p, policy_row ? &(*policy_row)[p] : nullptr);
        return upper_concave_envelope(cfg_.promise_grid, values);
    }

    // Applies the operator on `rows`; other rows of the output copy V.
    ValueSurface apply(const ValueSurface& V, const std::vector<std::size_t>& rows, PolicyTable* policy) const {
        const auto cols = columns(V);
        ValueSurface out = V;
        std::vector<std::vector<std::vector<ContractAtom>>> prows(rows.size());
        std::vector<std::vector<double>> vals(rows.size());
        auto work = [&](std::size_t i) {
            if (policy) prows[i].assign(cfg_.promise_grid.size(), {});
            vals[i] = solve_row(cols, rows[i], policy ? &prows[i] : nullptr);
        };
        const std::size_t threads = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), rows.size());
        if (threads <= 1) {
            for (std::size_t i = 0; i < rows.size(); ++i) work(i);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < threads; ++t)
                pool.emplace_back([&, t] {
                    for (std::size_t i = t; i < rows.size(); i += threads) work(i);
                });
            for (auto& th : pool) th.join();
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.row(rows[i]) = std::move(vals[i]);
            if (policy)
                for (std::size_t p = 0; p < cfg_.promise_grid.size(); ++p) policy->at(rows[i], p) = std::move(prows[i][p]);
        }
        return out;
    }

    const std::vector<AtomSpec>& atoms() const { return atoms_; }
    std::size_t cont_of(std::size_t atom) const { return atoms_.at(atom).cont; }

private:
    const DiscountedGame& game_;
    const SolverConfig& cfg_;
    BeliefLocator locator_;
    std::vector<Continuation> conts_;
    std::vector<AtomSpec> atoms_;
    std::vector<std::size_t> active_;
    double spread_ = 0.0;
};

void check_surface_grid(const ValueSurface& V, const SolverConfig& cfg) {
    if (V.beliefs().size() != cfg.belief_grid.size() || V.promises() != cfg.promise_grid)
        throw InvalidInput("surface grid does not match the solver configuration");
}

std::vector<std::size_t> all_rows(const SolverConfig& cfg) {
    std::vector<std::size_t> r(cfg.belief_grid.size());
    std::iota(r.begin(), r.end(), 0);
    return r;
}

SolveResult solve_impl(const DiscountedGame& game, const SolverConfig& cfg, bool degenerate_only) {
    validate_config(game, cfg);
    Operator op(game, cfg, degenerate_only);
    SolveResult res;
    res.interpolation_spread = op.spread();
    ValueSurface V = ValueSurface::constant(cfg, 0.0);
    bool converged = false;
    // rows no continuation reads are evaluated once, after the fixed point
    const auto& active = op.active_rows();
    for (int it = 0; it < cfg.max_iterations; ++it) {
        ValueSurface next = op.apply(V, active, nullptr);
        double d = 0.0;
        for (std::size_t b : active)
            for (std::size_t p = 0; p < cfg.promise_grid.size(); ++p) {
                const double x = next.value(b, p), y = V.value(b, p);
                if (std::isinf(x) && std::isinf(y)) continue;
                d = std::max(d, std::abs(x - y));
            }
        res.deltas.push_back(d);
        V = std::move(next);
        res.iterations = it + 1;
        if (d < cfg.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NoConvergence("value iteration did not reach the tolerance within the iteration budget");
    for (std::size_t i = 1; i < res.deltas.size(); ++i)
        if (res.deltas[i - 1] > 1e-6) res.contraction_ratio = std::max(res.contraction_ratio, res.deltas[i] / res.deltas[i - 1]);
    res.policy = PolicyTable(cfg.belief_grid.size(), cfg.promise_grid.size());
    res.surface = op.apply(V, all_rows(cfg), &res.policy);
    return res;
}

}  // namespace

ValueSurface bellman_step(const DiscountedGame& game, const ValueSurface& V, const SolverConfig& config) {
    return bellman_step(game, V, config, nullptr);
}

ValueSurface bellman_step(const DiscountedGame& game, const ValueSurface& V, const SolverConfig& config,
                          PolicyTable* policy) {
    validate_config(game, config);
    check_surface_grid(V, config);
    Operator op(game, config, false);
    if (policy) *policy = PolicyTable(config.belief_grid.size(), config.promise_grid.size());
    return op.apply(V, all_rows(config), policy);
}

SolveResult solve(const DiscountedGame& game, const SolverConfig& config) { return solve_impl(game, config, false); }

SolveResult solve_full_revelation(const DiscountedGame& game, const SolverConfig& config) {
    return solve_impl(game, config, true);
}

// ---------------------------------------------------------------- residuals

double obedience_residual(const DiscountedGame& game, const ContractAtom& atom) {
    const StageGame& st = game.stage();
    const double d = game.discount();
    const Belief next = game.chain().step(atom.belief);
    const double lhs = (1.0 - d) * (expected_payoff(st, atom.belief, atom.action, Side::receiver) + atom.transfer) +
                       d * atom.promise;
    const double rhs = (1.0 - d) * myopic_receiver_value(st, atom.belief) + d * no_info_value(game, next);
    return lhs - rhs;
}

double promise_keeping_residual(const DiscountedGame& game, const std::vector<ContractAtom>& atoms, double promise) {
    const double d = game.discount();
    double total = 0.0;
    for (const auto& a : atoms)
        total += a.weight * ((1.0 - d) * (expected_payoff(game.stage(), a.belief, a.action, Side::receiver) + a.transfer) +
                             d * a.promise);
    return total - promise;
}

// ---------------------------------------------------------------- backloading audit

BackloadingReport verify_backloading(const DiscountedGame& game, const ValueSurface& V, const PolicyTable& policy,
                                     const SolverConfig& config) {
    validate_config(game, config);
    check_surface_grid(V, config);
    BackloadingReport report;
    Operator op(game, config, false);
    const double k = game.k();

    std::vector<std::pair<std::size_t, std::size_t>> paying;
    for (std::size_t b = 0; b < config.belief_grid.size(); ++b)
        for (std::size_t p = 0; p < config.promise_grid.size(); ++p)
            for (const auto& a : policy.at(b, p))
                if (a.transfer > 1e-7) {
                    paying.emplace_back(b, p);
                    break;
                }
    if (paying.empty()) return report;

    const ValueSurface VFI = solve_full_revelation(game, config).surface;
    const auto cols = op.columns(V);
    LinearProgram base_lp = op.program(cols);
    // paying columns continue under full revelation; promise-only columns keep V
    std::vector<Column> restricted;
    op.add_columns(op.psis(V, false), restricted);
    op.add_columns(op.psis(VFI, true), restricted);
    LinearProgram restricted_lp = op.program(restricted);

    for (auto [b, p] : paying) {
        BackloadingCheck chk;
        chk.belief_index = b;
        chk.promise_index = p;
        chk.slope_residual = 0.0;
        double worst = -1.0;
        const auto& atoms = policy.at(b, p);
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const auto& a = atoms[i];
            if (a.transfer <= 1e-7) continue;
            const Belief next = game.chain().step(a.belief);
            const auto locs = BeliefLocator(config.belief_grid, config.lattice_resolution).locate(next);
            std::vector<double> f(config.promise_grid.size(), 0.0);
            for (const auto& [idx, w] : locs.weights)
                for (std::size_t q = 0; q < f.size(); ++q) f[q] += w * V.value(idx, q);
            const std::size_t m = right_segment(config.promise_grid, a.promise);
            const double slope = (f[m + 1] - f[m]) / (config.promise_grid[m + 1] - config.promise_grid[m]);
            const double resid = slope + k;
            if (std::abs(resid) > worst) {
                worst = std::abs(resid);
                chk.atom_index = i;
                chk.transfer = a.transfer;
                chk.continuation_promise = a.promise;
                chk.slope = slope;
                chk.slope_residual = resid;
            }
        }
        chk.slope_ok = std::abs(chk.slope_residual) <= 1e-4;
        chk.value = op.solve_point(base_lp, cols, b, p, nullptr);
        chk.restricted_value = op.solve_point(restricted_lp, restricted, b, p, nullptr);
        chk.witness_ok = chk.restricted_value >= chk.value - 1e-6;
        if (!chk.slope_ok || !chk.witness_ok) {
            report.passed = false;
            ++report.failures;
        }
        report.checks.push_back(chk);
    }
    return report;
}

// ---------------------------------------------------------------- pullback

PullbackResult pullback(const DiscountedGame& game, const std::vector<Matrix>& target, double base_receiver_value) {
    const StageGame& st = game.stage();
    const std::size_t n = st.num_states(), na = st.num_actions();
    const double d = game.discount();
    if (target.empty()) throw InconsistentMarginals("at least one target marginal is required");

    PullbackResult res;
    res.strategy.transfers = Matrix(Eigen::Index(n), Eigen::Index(na));
    const Vector best_u = st.u().colwise().maxCoeff().transpose();
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < na; ++a)
            res.strategy.transfers(Eigen::Index(s), Eigen::Index(a)) = best_u[Eigen::Index(s)] - st.u(a, s);

    Belief mu = game.prior();
    double weight = 1.0;
    for (std::size_t xi = 0; xi < target.size(); ++xi) {
        const Matrix& q = target[xi];
        if (q.rows() != Eigen::Index(n) || q.cols() != Eigen::Index(na))
            throw InconsistentMarginals("target marginal has the wrong shape");
        if (!q.allFinite() || q.minCoeff() < -1e-12) throw InconsistentMarginals("target marginal has negative mass");
        const Vector state_marg = q.rowwise().sum();
        if ((state_marg - mu.probabilities()).cwiseAbs().maxCoeff() > 1e-9)
            throw InconsistentMarginals("target state marginal differs from the prior's evolution");
        const bool last = xi + 1 == target.size();
        if (last && game.chain().step(mu).sup_distance(mu) > 1e-9)
            throw InconsistentMarginals("final target must sit at a stationary state law");

        Matrix cond = Matrix::Zero(Eigen::Index(n), Eigen::Index(na));
        Matrix realized = Matrix::Zero(Eigen::Index(n), Eigen::Index(na));
        for (std::size_t s = 0; s < n; ++s) {
            const double m = state_marg[Eigen::Index(s)];
            for (std::size_t a = 0; a < na; ++a)
                cond(Eigen::Index(s), Eigen::Index(a)) =
                    m > 0.0 ? std::max(0.0, q(Eigen::Index(s), Eigen::Index(a))) / m : (a == 0 ? 1.0 : 0.0);
            for (std::size_t a = 0; a < na; ++a)
                realized(Eigen::Index(s), Eigen::Index(a)) = mu[s] * cond(Eigen::Index(s), Eigen::Index(a));
        }
        res.strategy.action_given_state.push_back(cond);
        res.realized_marginals.push_back(realized);

        const double w = last ? weight : (1.0 - d) * weight;  // the last entry carries the tail mass
        double pay = 0.0, eu = 0.0, fi = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            fi += mu[s] * best_u[Eigen::Index(s)];
            for (std::size_t a = 0; a < na; ++a) {
                const double pr = realized(Eigen::Index(s), Eigen::Index(a));
                pay += pr * res.strategy.transfers(Eigen::Index(s), Eigen::Index(a));
                eu += pr * st.u(a, s);
            }
        }
        res.sender_cost += w * game.k() * pay;
        res.receiver_value += w * eu;
        res.full_info_value += w * fi;
        weight *= d;
        mu = game.chain().step(mu);
    }
    res.accounting_gap = res.sender_cost - game.k() * (res.full_info_value - base_receiver_value);
    return res;
}

double unit_draw(std::uint64_t bits) { return double(bits >> 11) * 0x1.0p-53; }

namespace {

std::size_t draw_index(std::mt19937_64& rng, const std::vector<double>& weights) {
    double r = unit_draw(rng());
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last = i;
        acc += weights[i];
        if (r < acc) return i;
    }
    return last;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::vector<PullbackStep> simulate_pullback(const DiscountedGame& game, const PullbackStrategy& strategy,
                                            std::uint64_t seed, int horizon) {
    std::mt19937_64 rng(seed);
    std::vector<PullbackStep> out;
    if (horizon <= 0 || strategy.action_given_state.empty()) return out;
    const Matrix& rows = game.chain().rows();
    std::size_t state = draw_index(rng, game.prior().to_vector());
    for (int xi = 0; xi < horizon; ++xi) {
        if (xi > 0) state = draw_index(rng, to_std(rows.row(Eigen::Index(state)).transpose()));
        const Matrix& cond =
            strategy.action_given_state[std::min<std::size_t>(std::size_t(xi), strategy.action_given_state.size() - 1)];
        const std::size_t a = draw_index(rng, to_std(cond.row(Eigen::Index(state)).transpose()));
        out.push_back({xi, state, a, strategy.transfers(Eigen::Index(state), Eigen::Index(a))});
    }
    return out;
}

// ---------------------------------------------------------------- playout

History playout(const DiscountedGame& game, const ValueSurface& V, const PolicyTable& policy, std::uint64_t seed,
                int horizon) {
    History h;
    if (horizon <= 0) return h;
    std::mt19937_64 rng(seed);
    const StageGame& st = game.stage();
    const double d = game.discount();
    const auto& grid = V.promises();
    std::size_t b = V.belief_index(game.prior());
    double promise = 0.0;
    double weight = 1.0;
    for (int xi = 0; xi < horizon; ++xi) {
        const double span_tol = 1e-9 * (1.0 + std::abs(grid.back()));
        if (promise < grid.front() - span_tol || promise > grid.back() + span_tol)
            throw UnreachablePoint("promise path left the grid");
        const std::size_t p = V.nearest_promise(promise);
        const auto& atoms = policy.at(b, p);
        if (atoms.empty()) throw UnreachablePoint("no policy at a reached grid point");

        std::vector<double> w;
        for (const auto& a : atoms) w.push_back(a.weight);
        const ContractAtom& atom = atoms[draw_index(rng, w)];
        const std::size_t s = draw_index(rng, atom.belief.to_vector());

        HistoryRecord rec;
        rec.period = xi;
        rec.belief_index = b;
        rec.prior = V.beliefs()[b];
        rec.promise = promise;
        rec.snap_error = std::abs(promise - grid[p]);
        rec.atom = atom;
        rec.state = s;
        rec.sender_flow = st.v(atom.action, s) - game.k() * atom.transfer;
        rec.receiver_flow = st.u(atom.action, s) + atom.transfer;
        rec.obedience = obedience_residual(game, atom);
        h.sender_discounted += (1.0 - d) * weight * rec.sender_flow;
        h.receiver_discounted += (1.0 - d) * weight * rec.receiver_flow;
        rec.sender_discounted = h.sender_discounted;
        rec.receiver_discounted = h.receiver_discounted;
        h.max_snap_error = std::max(h.max_snap_error, rec.snap_error);
        h.min_obedience = std::min(h.min_obedience, rec.obedience);
        h.records.push_back(std::move(rec));

        weight *= d;
        // with delta = 0 promises carry no weight, so every period restarts at promise 0
        promise = d > 0.0 ? atom.promise : 0.0;
        b = V.nearest_belief(game.chain().step(atom.belief));
    }
    return h;
}

}  // namespace dyncontract
