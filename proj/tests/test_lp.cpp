#include "dyncontract/lp.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dyncontract;

TEST_CASE("textbook optimum") {
    LinearProgram lp(2);
    lp.set_objective({3.0, 5.0});
    lp.add_row({1.0, 0.0}, Sense::le, 4.0);
    lp.add_row({0.0, 2.0}, Sense::le, 12.0);
    lp.add_row({3.0, 2.0}, Sense::le, 18.0);
    const LpResult r = lp.maximize();
    REQUIRE(r.optimal());
    CHECK(r.objective == doctest::Approx(36.0));
    CHECK(r.x[0] == doctest::Approx(2.0));
    CHECK(r.x[1] == doctest::Approx(6.0));
}

TEST_CASE("equality and >= rows need phase one") {
    LinearProgram lp(2);
    lp.set_objective({1.0, 1.0});
    lp.add_row({1.0, 2.0}, Sense::eq, 4.0);
    lp.add_row({0.0, 1.0}, Sense::ge, 1.0);
    const LpResult r = lp.maximize();
    REQUIRE(r.optimal());
    CHECK(r.objective == doctest::Approx(3.0));
    CHECK(r.x[0] == doctest::Approx(2.0));
}

TEST_CASE("negative right-hand sides") {
    LinearProgram lp(1);
    lp.set_objective({-1.0});
    lp.add_row({-1.0}, Sense::le, -2.5);
    const LpResult r = lp.maximize();
    REQUIRE(r.optimal());
    CHECK(r.x[0] == doctest::Approx(2.5));
}

TEST_CASE("infeasible and unbounded programs") {
    LinearProgram bad(1);
    bad.set_objective({1.0});
    bad.add_row({1.0}, Sense::ge, 2.0);
    bad.add_row({1.0}, Sense::le, 1.0);
    CHECK(bad.maximize().status == LpStatus::infeasible);

    LinearProgram open(2);
    open.set_objective({1.0, 0.0});
    open.add_row({1.0, -1.0}, Sense::le, 1.0);
    CHECK(open.maximize().status == LpStatus::unbounded);
}

TEST_CASE("random two-variable programs agree with vertex enumeration") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        struct R {
            double a, b, r;
        };
        std::vector<R> rows{{1, 0, 3}, {0, 1, 3}};
        for (int i = 0; i < 4; ++i) rows.push_back({U(rng), U(rng), 0.5 + std::abs(U(rng))});
        const double c0 = U(rng), c1 = U(rng);
        LinearProgram lp(2);
        lp.set_objective({c0, c1});
        for (const auto& r : rows) lp.add_row({r.a, r.b}, Sense::le, r.r);
        const LpResult res = lp.maximize();
        REQUIRE(res.optimal());

        rows.push_back({-1, 0, 0});
        rows.push_back({0, -1, 0});
        double best = -INFINITY;
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = i + 1; j < rows.size(); ++j) {
                const double det = rows[i].a * rows[j].b - rows[i].b * rows[j].a;
                if (std::abs(det) < 1e-12) continue;
                const double x = (rows[i].r * rows[j].b - rows[i].b * rows[j].r) / det;
                const double y = (rows[i].a * rows[j].r - rows[i].r * rows[j].a) / det;
                const bool feas = std::all_of(rows.begin(), rows.end(),
                                              [&](const R& r) { return r.a * x + r.b * y <= r.r + 1e-9; });
                if (feas) best = std::max(best, c0 * x + c1 * y);
            }
        CHECK(res.objective == doctest::Approx(best).epsilon(1e-9));
    }
}
