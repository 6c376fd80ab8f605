#include "dyncontract/analysis.hpp"

#include "dyncontract/lp.hpp"
#include "dyncontract/static_solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace dyncontract {

std::vector<std::size_t> feasibly_optimal_set(const StageGame& game) {
    const std::size_t na = game.num_actions(), ns = game.num_states();
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < na; ++a) {
        bool excluded = false;
        for (std::size_t b = 0; b < na && !excluded; ++b) {
            if (b == a) continue;
            double gain = INFINITY, loss = -INFINITY;
            for (std::size_t s = 0; s < ns; ++s) {
                gain = std::min(gain, game.v(b, s) - game.v(a, s));
                loss = std::max(loss, game.u(a, s) - game.u(b, s));
            }
            excluded = gain > game.k() * loss;
        }
        if (!excluded) out.push_back(a);
    }
    return out;
}

namespace {

struct RatioParts {
    std::vector<double> numerators;  // one per feasibly optimal action
    double denominator = 0.0;
};

RatioParts ratio_parts(const StageGame& game, const std::vector<std::size_t>& F, const Belief& mu) {
    RatioParts r;
    r.denominator = full_info_stage_value(game, mu) - myopic_receiver_value(game, mu);
    double fi_sender = 0.0;
    for (std::size_t s = 0; s < game.num_states(); ++s) {
        if (mu[s] == 0.0) continue;
        const std::size_t a = best_response(game, Belief::degenerate(game.num_states(), s)).action;
        fi_sender += mu[s] * game.v(a, s);
    }
    for (std::size_t a : F) r.numerators.push_back(fi_sender - expected_payoff(game, mu, a, Side::sender));
    return r;
}

double ratio_from(const RatioParts& r) {
    if (r.denominator <= 1e-12) throw DegenerateDenominator("full information gives the Receiver no strict gain");
    return *std::min_element(r.numerators.begin(), r.numerators.end()) / r.denominator;
}

bool in_region(const StageGame& game, const std::vector<std::size_t>& F, const Belief& mu, double k) {
    if (!mu.is_interior()) return false;
    const RatioParts r = ratio_parts(game, F, mu);
    if (r.denominator <= 1e-12) return false;
    return ratio_from(r) > -k + 1e-9;
}

Belief random_belief(std::mt19937_64& rng, std::size_t n) {
    Vector p = Vector::Zero(Eigen::Index(n));
    for (auto& e : p) e = -std::log1p(-unit_draw(rng()));
    return Belief::normalized(p / p.sum());
}

}  // namespace

double effectiveness_ratio(const StageGame& game, const Belief& belief) {
    return ratio_from(ratio_parts(game, feasibly_optimal_set(game), belief));
}

bool in_effectiveness_region(const StageGame& game, const Belief& belief, double k) {
    return in_region(game, feasibly_optimal_set(game), belief, k);
}

RegionReport effectiveness_region_check(const StageGame& game, std::vector<double> k_values, std::size_t samples,
                                        std::uint64_t seed) {
    std::sort(k_values.begin(), k_values.end());
    RegionReport rep;
    rep.k_values = k_values;
    const auto F = feasibly_optimal_set(game);
    const std::size_t n = game.num_states();
    std::mt19937_64 rng(seed);

    auto check_nesting = [&](const Belief& mu) {
        for (std::size_t i = 0; i + 1 < k_values.size(); ++i) {
            ++rep.nesting_checks;
            if (in_region(game, F, mu, k_values[i]) && !in_region(game, F, mu, k_values[i + 1]))
                rep.violations.push_back({"nesting", k_values[i], mu, mu});
        }
    };

    for (double k : k_values) {
        std::size_t accepted = 0;
        const std::size_t budget = 50 * samples + 100;
        std::optional<Belief> held;
        for (std::size_t attempt = 0; attempt < budget && accepted < samples; ++attempt) {
            Belief mu = random_belief(rng, n);
            ++rep.draws;
            check_nesting(mu);
            if (!in_region(game, F, mu, k)) continue;
            if (!held) {
                held = std::move(mu);
                continue;
            }
            const Belief mid = Belief::normalized(0.5 * (held->probabilities() + mu.probabilities()));
            ++rep.convexity_checks;
            ++accepted;
            if (!in_region(game, F, mid, k)) rep.violations.push_back({"convexity", k, *held, mu});
            held.reset();
        }
    }
    return rep;
}

bool is_nontrivial(const DiscountedGame& game, const ValueSurface& V) {
    return right_derivative(V, 0.0, game.prior()) > -game.k() + 1e-4;
}

bool is_incentivizable_static(const StageGame& game, const Belief& prior) {
    const auto K = extremal_beliefs(game);
    return k_cavify(game, K, prior).value > persuasion_only_value(game, K, prior) + 1e-9;
}

ErgodicCoupling ergodic_bound(const DiscountedGame& game) {
    const StageGame& st = game.stage();
    const std::size_t ns = st.num_states(), na = st.num_actions();
    ErgodicCoupling out;
    out.stationary = ergodic_distribution(game.chain());
    out.outside_option = myopic_receiver_value(st, out.stationary);

    const std::size_t nv = ns * na + 1, m = ns * na;
    auto var = [na](std::size_t s, std::size_t a) { return s * na + a; };
    LinearProgram lp(nv);
    std::vector<double> obj(nv, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a) obj[var(s, a)] = st.v(a, s);
    obj[m] = -st.k();
    lp.set_objective(obj);
    for (std::size_t s = 0; s < ns; ++s) {
        std::vector<double> row(nv, 0.0);
        for (std::size_t a = 0; a < na; ++a) row[var(s, a)] = 1.0;
        lp.add_row(std::move(row), Sense::eq, out.stationary[s]);
    }
    std::vector<double> ir(nv, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a) ir[var(s, a)] = st.u(a, s);
    ir[m] = 1.0;
    lp.add_row(ir, Sense::ge, out.outside_option);
    LpResult res = lp.maximize();
    if (!res.optimal()) throw Error("ergodic coupling program failed");

    if (st.k() == 0.0) {
        // payments are free; keep the smallest one among optimal couplings
        lp.add_row(obj, Sense::ge, res.objective - 1e-12 * (1.0 + std::abs(res.objective)));
        std::vector<double> pay(nv, 0.0);
        pay[m] = -1.0;
        lp.set_objective(pay);
        LpResult second = lp.maximize();
        if (second.optimal()) res.x = second.x;
    }

    out.gamma = Matrix::Zero(Eigen::Index(ns), Eigen::Index(na));
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a) out.gamma(Eigen::Index(s), Eigen::Index(a)) = std::max(0.0, res.x[var(s, a)]);
    out.payment = std::max(0.0, res.x[m]);
    out.value = -st.k() * out.payment;
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a) out.value += out.gamma(Eigen::Index(s), Eigen::Index(a)) * st.v(a, s);
    return out;
}

DynamicsBenefit dynamics_benefit(const StageGame& game, const Belief& prior) {
    // shift u so the no-information value at the prior is zero
    const double base = myopic_receiver_value(game, prior);
    const Matrix shifted = game.u().array() - base;
    const StageGame norm = game.with_payoffs(shifted, game.v());
    const StaticSolution sol = k_cavify(norm, prior);
    DynamicsBenefit out;
    out.static_value = sol.value;
    out.receiver_surplus = sol.receiver_value() - myopic_receiver_value(norm, prior);
    for (std::size_t s = 0; s < game.num_states(); ++s)
        out.first_best += prior[s] * game.v().col(Eigen::Index(s)).maxCoeff();
    out.benefits = out.receiver_surplus > 1e-9 && out.static_value < out.first_best - 1e-9;
    return out;
}

bool benefits_from_dynamics(const StageGame& game, const Belief& prior) { return dynamics_benefit(game, prior).benefits; }

PolicyAudit audit_feasibly_optimal(const StageGame& game, const PolicyTable& policy) {
    const auto F = feasibly_optimal_set(game);
    PolicyAudit audit;
    for (std::size_t b = 0; b < policy.num_beliefs(); ++b)
        for (std::size_t p = 0; p < policy.num_promises(); ++p)
            for (const auto& atom : policy.at(b, p)) {
                if (atom.weight <= 1e-7) continue;
                ++audit.atoms_checked;
                if (std::find(F.begin(), F.end(), atom.action) == F.end()) {
                    ++audit.violations;
                    audit.notes.push_back("action " + std::to_string(atom.action) + " at grid point (" +
                                          std::to_string(b) + ", " + std::to_string(p) + ") is excluded");
                }
            }
    return audit;
}

PolicyAudit audit_effectiveness(const DiscountedGame& game, const ValueSurface& V, const PolicyTable& policy) {
    const StageGame& st = game.stage();
    const auto F = feasibly_optimal_set(st);
    const double k = game.k();
    PolicyAudit audit;
    for (std::size_t b = 0; b < policy.num_beliefs(); ++b)
        for (std::size_t p = 0; p < policy.num_promises(); ++p)
            for (const auto& atom : policy.at(b, p)) {
                if (atom.weight <= 1e-7 || atom.transfer <= 1e-7) continue;
                const std::size_t nb = V.nearest_belief(game.chain().step(atom.belief));
                const std::size_t np = V.nearest_promise(atom.promise);
                for (const auto& next : policy.at(nb, np)) {
                    if (next.weight <= 1e-7) continue;
                    ++audit.atoms_checked;
                    if (next.belief.is_degenerate(1e-9)) continue;
                    const RatioParts r = ratio_parts(st, F, next.belief);
                    if (r.denominator <= 1e-12) continue;
                    const double e = ratio_from(r);
                    if (std::abs(e + k) <= 1e-4) ++audit.boundary_hits;
                    if (e > -k + 1e-4) {
                        ++audit.violations;
                        audit.notes.push_back("successor of (" + std::to_string(b) + ", " + std::to_string(p) +
                                              ") supports a belief with ratio " + std::to_string(e));
                    }
                }
            }
    return audit;
}

}  // namespace dyncontract
