#include "support.hpp"

#include "dyncontract/game.hpp"

#include <doctest.h>

using namespace dyncontract;

TEST_CASE("belief construction rejects bad vectors") {
    CHECK_THROWS_AS(Belief(std::vector<double>{0.5, 0.6}), InvalidInput);
    CHECK_THROWS_AS(Belief(std::vector<double>{1.2, -0.2}), InvalidInput);
    CHECK_THROWS_AS(Belief(std::vector<double>{}), InvalidInput);
    CHECK_THROWS_AS(Belief::degenerate(2, 2), InvalidInput);

    const Belief b = Belief::normalized(Vector::Constant(3, 1.0 / 3.0));
    CHECK(b.probabilities().sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(b.is_interior());
    CHECK_FALSE(b.is_degenerate());
    CHECK(Belief::degenerate(3, 1).is_degenerate());
    CHECK(Belief::binary(0.25)[1] == 0.25);
    CHECK(Belief::uniform(4).near(Belief(std::vector<double>{0.25, 0.25, 0.25, 0.25})));
}

TEST_CASE("stage game validates shapes and k") {
    Matrix u = Matrix::Zero(2, 2), v = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(StageGame(support::names("s", 2), support::names("a", 2), u, v, 0.0), InvalidInput);
    CHECK_THROWS_AS(StageGame(support::names("s", 2), support::names("a", 3), u, v, 1.0), InvalidInput);
    CHECK_THROWS_AS(StageGame(support::names("s", 1), support::names("a", 2), Matrix::Zero(2, 1),
                              Matrix::Zero(2, 1), 1.0),
                    InvalidInput);
    Matrix bad = u;
    bad(0, 0) = NAN;
    CHECK_THROWS_AS(StageGame(support::names("s", 2), support::names("a", 2), bad, v, 1.0), InvalidInput);
}

TEST_CASE("discounted game checks discount and promise bound") {
    const StageGame g = support::appendix_d();
    const Belief p = support::appendix_d_prior();
    CHECK_THROWS_AS(DiscountedGame(g, MarkovChain::iid(p), p, 1.0), InvalidInput);
    CHECK_THROWS_AS(DiscountedGame(g, MarkovChain::iid(p), p, -0.1), InvalidInput);
    CHECK_THROWS_AS(DiscountedGame(g, MarkovChain::iid(p), p, 0.5, 1.0), InvalidInput);
    const DiscountedGame ok(g, MarkovChain::iid(p), p, 0.5);
    CHECK(ok.promise_bound() > g.u_sup_norm() / 0.5);
    CHECK_THROWS_AS(MarkovChain(Matrix::Constant(2, 2, 0.6)), InvalidInput);
}

TEST_CASE("best response breaks Receiver ties for the Sender") {
    // at mu1 = 1/3 actions 0 and 2 tie for the Receiver; the Sender prefers 0
    const StageGame g = support::appendix_d();
    const Belief third(std::vector<double>{2.0 / 3.0, 1.0 / 3.0});
    CHECK(best_response(g, third).action == 0);
    CHECK(best_response(g, third).receiver_value == doctest::Approx(0.0).epsilon(1e-12));

    // a transfer of 0.5 on action 1 makes it tie with action 2 at mu1 = 1/2
    const Belief half = Belief::binary(0.5);
    const Response r = best_response(g, half, {0.0, 0.5, 0.0});
    CHECK(r.action == 1);
    CHECK_THROWS_AS(best_response(g, half, {0.0, -1.0, 0.0}), InvalidInput);
    CHECK_THROWS_AS(best_response(g, half, {0.0, 0.0}), InvalidInput);
    CHECK_THROWS_AS(expected_payoff(g, half, 7, Side::receiver), OutOfRange);
}

TEST_CASE("stage values against direct sums") {
    const StageGame g = support::appendix_d();
    const Belief p = support::appendix_d_prior();
    CHECK(myopic_receiver_value(g, p) == doctest::Approx(0.5));
    CHECK(full_info_stage_value(g, p) == doctest::Approx(1.0));
}

TEST_CASE("no-information value matches the term-by-term series") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + std::size_t(trial % 2);
        Matrix rows = Matrix::Zero(Eigen::Index(n), Eigen::Index(n));
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            for (Eigen::Index j = 0; j < rows.cols(); ++j) rows(i, j) = 0.05 + support::uniform(rng, 0.0, 1.0);
            rows.row(i) /= rows.row(i).sum();
        }
        const StageGame g = support::random_stage(rng, n, 3, 1.0);
        const Belief prior = Belief::degenerate(n, 0);
        const DiscountedGame game(g, MarkovChain(rows), prior, support::uniform(rng, 0.0, 0.95));
        CHECK(no_info_value(game, prior) == doctest::Approx(support::no_info_series(game)).epsilon(1e-9));
        CHECK(full_info_value(game, prior) >= no_info_value(game, prior) - 1e-12);
    }
}

TEST_CASE("ergodic distribution is stationary and needs a primitive chain") {
    Matrix rows(3, 3);
    rows << 0.5, 0.5, 0.0, 0.1, 0.6, 0.3, 0.2, 0.2, 0.6;
    const MarkovChain chain(rows);
    const Belief pi = ergodic_distribution(chain);
    CHECK(chain.step(pi).sup_distance(pi) < 1e-12);

    Matrix cycle(2, 2);
    cycle << 0, 1, 1, 0;
    CHECK_THROWS_AS(ergodic_distribution(MarkovChain(cycle)), NotErgodic);
    CHECK(MarkovChain::iid(Belief::binary(0.3)).is_iid());
    CHECK_FALSE(chain.is_iid());
}

TEST_CASE("Bayes plausibility of experiments") {
    const Belief prior = Belief::binary(0.4);
    Experiment e{{{Belief::binary(0.0), 0.6}, {Belief::binary(1.0), 0.4}}};
    CHECK(bayes_plausible(e, prior));
    e.atoms[0].weight = 0.5;
    e.atoms[1].weight = 0.5;
    CHECK_FALSE(bayes_plausible(e, prior));
    e.atoms[1].weight = 0.6;
    CHECK_THROWS_AS(bayes_plausible(e, prior), InvalidInput);
}
