#include "dyncontract/static_solver.hpp"

#include "dyncontract/lp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace dyncontract {

bool belief_order(const Belief& a, const Belief& b) {
    for (std::size_t i = a.size(); i-- > 0;) {
        if (a[i] < b[i] - 1e-12) return true;
        if (a[i] > b[i] + 1e-12) return false;
    }
    return false;
}

void sort_and_dedupe(std::vector<Belief>& beliefs, double tol) {
    std::vector<Belief> kept;
    for (auto& b : beliefs) {
        bool dup = false;
        for (const auto& k : kept)
            if (k.near(b, tol)) {
                dup = true;
                break;
            }
        if (!dup) kept.push_back(std::move(b));
    }
    std::sort(kept.begin(), kept.end(), belief_order);
    beliefs = std::move(kept);
}

namespace {

// Calls f on every size-r subset of {0..n-1} in lexicographic order.
void for_each_subset(std::size_t n, std::size_t r, const std::function<void(const std::vector<std::size_t>&)>& f) {
    if (r > n) return;
    std::vector<std::size_t> idx(r);
    for (std::size_t i = 0; i < r; ++i) idx[i] = i;
    while (true) {
        f(idx);
        std::size_t i = r;
        while (i > 0 && idx[i - 1] == n - r + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
}

Belief snap(const Vector& x) {
    Vector p = x;
    for (auto& e : p)
        if (std::abs(e) < 1e-13) e = 0.0;
    return Belief::normalized(p, 1e-7);
}

}  // namespace

ActionPolytope action_polytope(const StageGame& game, std::size_t a) {
    if (a >= game.num_actions()) throw OutOfRange("action index out of range");
    const std::size_t n = game.num_states();
    // halfspaces g . mu >= 0
    std::vector<Vector> halfspaces;
    for (std::size_t s = 0; s < n; ++s) halfspaces.push_back(Vector::Unit(Eigen::Index(n), Eigen::Index(s)));
    for (std::size_t b = 0; b < game.num_actions(); ++b) {
        if (b == a) continue;
        Vector g = (game.u().row(Eigen::Index(a)) - game.u().row(Eigen::Index(b))).transpose();
        if (g.cwiseAbs().maxCoeff() == 0.0) continue;
        halfspaces.push_back(g);
    }

    ActionPolytope poly{a, {}};
    std::vector<Belief> found;
    for_each_subset(halfspaces.size(), n - 1, [&](const std::vector<std::size_t>& active) {
        Matrix A = Matrix::Zero(Eigen::Index(n), Eigen::Index(n));
        Vector rhs = Vector::Zero(Eigen::Index(n));
        for (std::size_t r = 0; r + 1 < n; ++r) A.row(Eigen::Index(r)) = halfspaces[active[r]].transpose();
        A.row(Eigen::Index(n - 1)).setOnes();
        rhs[Eigen::Index(n - 1)] = 1.0;
        Eigen::FullPivLU<Matrix> lu(A);
        lu.setThreshold(1e-12);
        if (lu.rank() < Eigen::Index(n)) return;
        Vector x = lu.solve(rhs);
        for (const auto& g : halfspaces)
            if (g.dot(x) < -1e-9) return;
        found.push_back(snap(x));
    });
    sort_and_dedupe(found);
    poly.vertices = std::move(found);
    return poly;
}

ExtremalBeliefSet extremal_beliefs(const StageGame& game) {
    std::vector<Belief> all;
    for (std::size_t s = 0; s < game.num_states(); ++s) all.push_back(Belief::degenerate(game.num_states(), s));
    for (std::size_t a = 0; a < game.num_actions(); ++a) {
        auto poly = action_polytope(game, a);
        for (auto& v : poly.vertices) all.push_back(std::move(v));
    }
    sort_and_dedupe(all);
    return ExtremalBeliefSet{std::move(all)};
}

CanonicalTransfer canonical_transfer(const StageGame& game, const Belief& belief) {
    const double ustar = myopic_receiver_value(game, belief);
    CanonicalTransfer best{game.num_actions(), 0.0};
    double best_val = -INFINITY;
    for (std::size_t a = 0; a < game.num_actions(); ++a) {
        const double gap = ustar - expected_payoff(game, belief, a, Side::receiver);
        const double t = gap <= kTieTol ? 0.0 : gap;
        const double val = expected_payoff(game, belief, a, Side::sender) - game.k() * t;
        const bool better = val > best_val + kTieTol;
        const bool cheaper_tie = val >= best_val - kTieTol && t < best.transfer - kTieTol;
        if (better || cheaper_tie) {
            best = {a, t};
            best_val = val;
        }
    }
    return best;
}

double transfer_augmented_value(const StageGame& game, const Belief& belief) {
    auto ct = canonical_transfer(game, belief);
    return expected_payoff(game, belief, ct.action, Side::sender) - game.k() * ct.transfer;
}

double persuasion_stage_value(const StageGame& game, const Belief& belief) {
    auto r = best_response(game, belief);
    return expected_payoff(game, belief, r.action, Side::sender);
}

namespace {

LpResult cavify_lp(const std::vector<Belief>& points, const std::vector<double>& values, const Belief& prior) {
    const std::size_t m = points.size();
    LinearProgram lp(m);
    lp.set_objective(values);
    for (std::size_t s = 0; s < prior.size(); ++s) {
        std::vector<double> row(m);
        for (std::size_t j = 0; j < m; ++j) row[j] = points[j][s];
        lp.add_row(std::move(row), Sense::eq, prior[s]);
    }
    auto res = lp.maximize();
    if (!res.optimal()) throw Error("concavification program failed");
    return res;
}

}  // namespace

StaticSolution k_cavify(const StageGame& game, const Belief& prior) {
    return k_cavify(game, extremal_beliefs(game), prior);
}

StaticSolution k_cavify(const StageGame& game, const ExtremalBeliefSet& K, const Belief& prior) {
    if (prior.size() != game.num_states()) throw InvalidInput("prior dimension mismatch");
    std::vector<double> values;
    values.reserve(K.beliefs.size());
    for (const auto& b : K.beliefs) values.push_back(transfer_augmented_value(game, b));
    auto res = cavify_lp(K.beliefs, values, prior);

    StaticSolution sol;
    double total = 0.0;
    for (std::size_t j = 0; j < K.beliefs.size(); ++j)
        if (res.x[j] > 1e-10) total += res.x[j];
    for (std::size_t j = 0; j < K.beliefs.size(); ++j) {
        if (res.x[j] <= 1e-10) continue;
        const Belief& b = K.beliefs[j];
        auto ct = canonical_transfer(game, b);
        StaticAtom atom{b, res.x[j] / total, ct.action, ct.transfer, 0.0, 0.0};
        atom.sender_value = expected_payoff(game, b, ct.action, Side::sender) - game.k() * ct.transfer;
        atom.receiver_value = expected_payoff(game, b, ct.action, Side::receiver) + ct.transfer;
        sol.atoms.push_back(std::move(atom));
    }
    for (const auto& atom : sol.atoms) sol.value += atom.weight * atom.sender_value;
    return sol;
}

double persuasion_only_value(const StageGame& game, const Belief& prior) {
    return persuasion_only_value(game, extremal_beliefs(game), prior);
}

double persuasion_only_value(const StageGame& game, const ExtremalBeliefSet& K, const Belief& prior) {
    std::vector<double> values;
    for (const auto& b : K.beliefs) values.push_back(persuasion_stage_value(game, b));
    return cavify_lp(K.beliefs, values, prior).objective;
}

Experiment StaticSolution::experiment() const {
    Experiment e;
    for (const auto& a : atoms) e.atoms.push_back({a.belief, a.weight});
    return e;
}

double StaticSolution::receiver_value() const {
    double r = 0.0;
    for (const auto& a : atoms) r += a.weight * a.receiver_value;
    return r;
}

std::vector<Belief> simplex_lattice(std::size_t num_states, std::size_t resolution) {
    if (num_states < 1 || resolution < 1) throw InvalidInput("lattice needs states and a positive resolution");
    std::vector<Belief> out;
    std::vector<std::size_t> z(num_states, 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
        if (i + 1 == num_states) {
            z[i] = left;
            Vector p = Vector::Zero(Eigen::Index(num_states));
            for (std::size_t s = 0; s < num_states; ++s) p[Eigen::Index(s)] = double(z[s]) / double(resolution);
            out.push_back(Belief::normalized(p));
            return;
        }
        for (std::size_t c = 0; c <= left; ++c) {
            z[i] = c;
            rec(i + 1, left - c);
        }
    };
    rec(0, resolution);
    std::sort(out.begin(), out.end(), belief_order);
    return out;
}

std::vector<EnvelopeRow> envelope_table(const StageGame& game, std::size_t resolution) {
    auto K = extremal_beliefs(game);
    std::vector<EnvelopeRow> rows;
    for (auto& b : simplex_lattice(game.num_states(), resolution)) {
        EnvelopeRow r{b, persuasion_stage_value(game, b), transfer_augmented_value(game, b), 0.0, 0.0};
        r.cav_v0 = persuasion_only_value(game, K, b);
        r.cav_vt = k_cavify(game, K, b).value;
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace dyncontract
