#include "support.hpp"

#include "dyncontract/analysis.hpp"
#include "dyncontract/static_solver.hpp"

#include <doctest.h>

using namespace dyncontract;

namespace {

StageGame aligned(double k) {
    const Matrix eye = Matrix::Identity(2, 2);
    return StageGame(support::names("s", 2), support::names("a", 2), eye, eye, k);
}

std::vector<std::size_t> excluded_direct(const StageGame& g) {
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < g.num_actions(); ++a)
        for (std::size_t b = 0; b < g.num_actions(); ++b) {
            double dv = INFINITY, du = -INFINITY;
            for (std::size_t s = 0; s < g.num_states(); ++s) {
                dv = std::min(dv, g.v(b, s) - g.v(a, s));
                du = std::max(du, g.u(a, s) - g.u(b, s));
            }
            if (b != a && dv > g.k() * du) {
                out.push_back(a);
                break;
            }
        }
    return out;
}

}  // namespace

TEST_CASE("feasibly optimal set") {
    CHECK(feasibly_optimal_set(support::appendix_d()) == std::vector<std::size_t>{0, 1});
    CHECK(feasibly_optimal_set(aligned(0.7)) == std::vector<std::size_t>{0, 1});

    Matrix u(3, 2), v(3, 2);
    u << 1, 0, 0, 1, 0.5, 0.5;
    v << 0, 0, 5, 5, 1, 1;
    const StageGame dominant(support::names("s", 2), support::names("a", 3), u, v, 1.0);
    CHECK(feasibly_optimal_set(dominant) == std::vector<std::size_t>{1});

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const StageGame g = support::random_stage(rng, 2 + std::size_t(trial % 2), 4, support::uniform(rng, 0.1, 2.0));
        const auto F = feasibly_optimal_set(g);
        const auto X = excluded_direct(g);
        CHECK(F.size() + X.size() == g.num_actions());
        for (std::size_t a : X) CHECK(std::find(F.begin(), F.end(), a) == F.end());
    }
}

TEST_CASE("effectiveness ratio") {
    const StageGame g = support::appendix_d();
    CHECK(effectiveness_ratio(g, Belief::binary(0.5)) == doctest::Approx(-1.25));
    CHECK_THROWS_AS(effectiveness_ratio(g, Belief::binary(0.0)), DegenerateDenominator);
    CHECK_THROWS_AS(effectiveness_ratio(g, Belief::binary(1.0)), DegenerateDenominator);

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const StageGame r = support::random_stage(rng, 2, 3, 1.0);
        const Belief b = support::random_interior_belief(rng, 2);
        const double lam = support::uniform(rng, 0.2, 4.0);
        const StageGame scaled = r.with_payoffs(r.u(), lam * r.v());
        try {
            const double base = effectiveness_ratio(r, b);
            CHECK(effectiveness_ratio(scaled, b) == doctest::Approx(lam * base).epsilon(1e-9));
        } catch (const DegenerateDenominator&) {
            CHECK_THROWS_AS(effectiveness_ratio(scaled, b), DegenerateDenominator);
        }
    }
}

TEST_CASE("effectiveness regions are convex and nested") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 3; ++trial) {
        const StageGame g = support::random_stage(rng, 2 + std::size_t(trial % 2), 3, 1.0);
        const RegionReport rep = effectiveness_region_check(g, {2.0, 0.5, 1.0}, 150, 77 + std::uint64_t(trial));
        CHECK(rep.k_values == std::vector<double>{0.5, 1.0, 2.0});
        CHECK(rep.violations.empty());
    }
    const StageGame g = support::appendix_d();
    CHECK(in_effectiveness_region(g, Belief::binary(0.5), 2.0));
    CHECK_FALSE(in_effectiveness_region(g, Belief::binary(0.5), 1.0));
    CHECK_FALSE(in_effectiveness_region(g, Belief::binary(0.0), 1e6));
}

TEST_CASE("static incentivizability") {
    CHECK(is_incentivizable_static(support::appendix_d(), support::appendix_d_prior()));
    CHECK_FALSE(is_incentivizable_static(aligned(1.0), Belief::binary(0.3)));
}

TEST_CASE("ergodic coupling bound") {
    const Belief half = Belief::binary(0.5);
    const DiscountedGame a(aligned(2.0), MarkovChain::iid(half), half, 0.9);
    const ErgodicCoupling e = ergodic_bound(a);
    CHECK(e.value == doctest::Approx(1.0));
    CHECK(e.payment == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(e.gamma(0, 0) == doctest::Approx(0.5));
    CHECK(e.gamma(1, 1) == doctest::Approx(0.5));

    const Belief p = support::appendix_d_prior();
    const DiscountedGame d(support::appendix_d(), MarkovChain::iid(p), p, 0.9);
    CHECK(ergodic_bound(d).value >= 0.75 - 1e-9);

    // nearly free transfers reach the Sender first best
    const DiscountedGame cheap = d.with_k(1e-9);
    CHECK(ergodic_bound(cheap).value == doctest::Approx(2.5).epsilon(1e-6));

    Matrix cycle(2, 2);
    cycle << 0, 1, 1, 0;
    const DiscountedGame periodic(support::appendix_d(), MarkovChain(cycle), half, 0.9);
    CHECK_THROWS_AS(ergodic_bound(periodic), NotErgodic);
}

TEST_CASE("benefits from dynamics follows its definition") {
    CHECK_FALSE(benefits_from_dynamics(aligned(1.0), Belief::binary(0.4)));
    std::mt19937_64 rng(15);
    int positives = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const Belief prior = Belief::binary(support::uniform(rng, 0.1, 0.9));
        const StageGame g = support::normalize_at(support::random_stage(rng, 2, 3, 1.5), prior);
        const DynamicsBenefit b = dynamics_benefit(g, prior);
        const double fb = g.v().colwise().maxCoeff().dot(prior.probabilities().transpose());
        CHECK(b.first_best == doctest::Approx(fb));
        CHECK(b.static_value == doctest::Approx(k_cavify(g, prior).value));
        CHECK(b.benefits == (b.receiver_surplus > 1e-9 && b.static_value < fb - 1e-9));
        positives += b.benefits ? 1 : 0;
    }
    CHECK(positives > 0);
}

TEST_CASE("policy audits on a solved game") {
    const Belief p = support::appendix_d_prior();
    const DiscountedGame d(support::appendix_d(), MarkovChain::iid(p), p, 0.8);
    const SolverConfig cfg = make_solver_config(d, 8, 32);
    const SolveResult res = solve(d, cfg);
    const PolicyAudit f = audit_feasibly_optimal(d.stage(), res.policy);
    CHECK(f.atoms_checked > 0);
    CHECK(f.passed());
    CHECK(audit_effectiveness(d, res.surface, res.policy).passed());
    const bool nontrivial = is_nontrivial(d, res.surface);
    CHECK(nontrivial == (right_derivative(res.surface, 0.0, p) > -d.k() + 1e-4));
}
