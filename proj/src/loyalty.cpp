#include "dyncontract/loyalty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace dyncontract {

void RideGame::validate() const {
    if (n < 1 || c.size() != n || mu0.size() != n) throw InvalidInput("ride game needs n values of c and mu0");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(c[i] > 0.0)) throw InvalidInput("ride values must be positive");
        if (!(mu0[i] > 0.0 && mu0[i] < 0.5)) throw InvalidInput("ride priors must lie in (0, 1/2)");
    }
    if (!(k > 0.0)) throw InvalidInput("transfer cost must be positive");
    if (!(discount > 0.0 && discount < 1.0)) throw InvalidInput("discount must lie in (0, 1)");
}

RideGame RideGame::dimension(std::size_t i) const {
    return RideGame{1, {c.at(i)}, {mu0.at(i)}, k, discount};
}

DiscountedGame build_ride_game(const RideGame& ride) {
    ride.validate();
    if (ride.n > 3) throw TooLarge("ride games are limited to three dimensions");
    const std::size_t m = std::size_t(1) << ride.n;
    std::vector<std::string> states, actions;
    for (std::size_t x = 0; x < m; ++x) {
        std::string s, a;
        for (std::size_t i = 0; i < ride.n; ++i) {
            const bool bit = (x >> i) & 1U;
            s += bit ? 'G' : 'B';
            a += bit ? 'A' : 'R';
        }
        states.push_back("theta_" + s);
        actions.push_back("a_" + a);
    }
    Matrix u = Matrix::Zero(Eigen::Index(m), Eigen::Index(m));
    Matrix v = Matrix::Zero(Eigen::Index(m), Eigen::Index(m));
    Vector prior = Vector::Ones(Eigen::Index(m));
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t i = 0; i < ride.n; ++i) {
                const bool ai = (a >> i) & 1U, si = (s >> i) & 1U;
                u(Eigen::Index(a), Eigen::Index(s)) += ai == si ? 1.0 : 0.0;
                v(Eigen::Index(a), Eigen::Index(s)) += ai ? ride.c[i] : 0.0;
            }
    for (std::size_t s = 0; s < m; ++s)
        for (std::size_t i = 0; i < ride.n; ++i) prior[Eigen::Index(s)] *= ((s >> i) & 1U) ? ride.mu0[i] : 1.0 - ride.mu0[i];
    Belief mu0 = Belief::normalized(prior);
    StageGame stage(states, actions, u, v, ride.k);
    return DiscountedGame(stage, MarkovChain::iid(mu0), mu0, ride.discount);
}

double Frontier::value_at(double surplus) const {
    double value = origin_value, left = std::max(0.0, surplus);
    for (const auto& seg : segments) {
        const double step = std::min(left, seg.length);
        value += seg.slope * step;
        left -= step;
        if (left <= 0.0) break;
    }
    return value;
}

std::vector<std::pair<double, double>> Frontier::knots() const {
    std::vector<std::pair<double, double>> out{{0.0, origin_value}};
    double x = 0.0, y = origin_value;
    for (const auto& seg : segments) {
        if (!std::isfinite(seg.length)) break;
        x += seg.length;
        y += seg.slope * seg.length;
        out.emplace_back(x, y);
    }
    return out;
}

namespace {

// Cheap dimensions (c < k) by ascending c, index breaking ties.
std::vector<std::size_t> cheap_order(const RideGame& ride) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ride.n; ++i)
        if (ride.c[i] < ride.k) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ride.c[a] < ride.c[b]; });
    return idx;
}

}  // namespace

Frontier pareto_frontier(const RideGame& ride) {
    ride.validate();
    Frontier f;
    for (std::size_t i = 0; i < ride.n; ++i) {
        const double c = ride.c[i], mu = ride.mu0[i], k = ride.k;
        f.origin_value += c <= k ? 2.0 * mu * c : c - k * (1.0 - 2.0 * mu);
    }
    for (std::size_t i : cheap_order(ride)) f.segments.push_back({-ride.c[i], ride.mu0[i], i});
    f.segments.push_back({-ride.k, INFINITY, ride.n});
    return f;
}

TierSchedule tier_schedule(const RideGame& ride) {
    ride.validate();
    TierSchedule t;
    t.thresholds.assign(ride.n, 0.0);
    const auto cheap = cheap_order(ride);
    double cum = 0.0;
    for (std::size_t i : cheap) {
        cum += ride.mu0[i];
        t.thresholds[i] = cum;
        t.order.push_back(i);
    }
    t.knee = cum;
    for (std::size_t i = 0; i < ride.n; ++i)
        if (ride.c[i] >= ride.k) {
            t.thresholds[i] = cum;
            t.order.push_back(i);
        }
    const bool any_above = std::any_of(ride.c.begin(), ride.c.end(), [&](double c) { return c > ride.k; });
    t.no_dynamic_incentives = !any_above || cheap.empty();
    return t;
}

LoyaltyHistory simulate_loyalty(const RideGame& ride, std::uint64_t seed, int horizon) {
    ride.validate();
    if (std::none_of(ride.c.begin(), ride.c.end(), [&](double c) { return c > ride.k; }))
        throw InvalidInput("loyalty contracts need some ride worth more than the transfer cost");
    const TierSchedule sched = tier_schedule(ride);
    const double d = ride.discount;
    std::mt19937_64 rng(seed);
    auto draw = [&] { return unit_draw(rng()); };

    LoyaltyHistory h;
    h.promotion_time.assign(ride.n, -1);
    std::vector<bool> promoted(ride.n, false);
    double ledger = 0.0, weight = 1.0;
    for (int xi = 0; xi < horizon; ++xi) {
        LoyaltyPeriod per;
        per.period = xi;
        per.promoted_now.assign(ride.n, false);
        for (std::size_t i = 0; i < ride.n; ++i)
            if (!promoted[i] && ledger > sched.thresholds[i]) {
                promoted[i] = true;
                per.promoted_now[i] = true;
                h.promotion_time[i] = xi;
            }
        per.ledger = ledger;
        per.promoted = promoted;
        double accrued = 0.0;
        for (std::size_t i = 0; i < ride.n; ++i) {
            const double mu = ride.mu0[i], c = ride.c[i];
            const int theta = draw() < mu ? 1 : 0;
            double posterior, t = 0.0;
            int a;
            if (!promoted[i]) {
                // split into posteriors {0, 1/2}
                posterior = theta == 1 || draw() < mu / (1.0 - mu) ? 0.5 : 0.0;
                if (posterior > 0.0) {
                    a = 1;
                } else if (c > ride.k) {
                    a = 1;
                    accrued += (1.0 - d) / d;
                } else {
                    a = 0;
                }
            } else {
                posterior = double(theta);
                if (theta == 1) {
                    a = 1;
                } else if (c > ride.k) {
                    a = 1;
                    t = 1.0;
                } else {
                    a = 0;
                }
            }
            if (t > 0.0 && !promoted[i]) ++h.transfers_before_promotion;
            if (theta == 1) {
                ++h.good_rides;
                if (a == 0) ++h.good_rides_rejected;
            }
            per.state.push_back(theta);
            per.posterior.push_back(posterior);
            per.action.push_back(a);
            per.transfer.push_back(t);
            per.sender_flow += (a ? c : 0.0) - ride.k * t;
            per.receiver_flow += (a == theta ? 1.0 : 0.0) + t;
        }
        ledger += accrued;
        h.sender_discounted += (1.0 - d) * weight * per.sender_flow;
        h.receiver_discounted += (1.0 - d) * weight * per.receiver_flow;
        weight *= d;
        h.periods.push_back(std::move(per));
    }
    return h;
}

SolverConfig make_ride_config(const RideGame& ride, std::size_t belief_resolution, std::size_t promise_points) {
    const DiscountedGame game = build_ride_game(ride);
    const double base = no_info_value(game, game.prior());
    double total = 0.0;
    for (double m : ride.mu0) total += m;
    return make_solver_config(game, belief_resolution, promise_points, {base, base + total, base + 2.0 * total});
}

CrosscheckReport crosscheck(const RideGame& ride, const SolverConfig& config) {
    if (ride.n != 1) throw InvalidInput("crosscheck compares single-ride games");
    const DiscountedGame game = build_ride_game(ride);
    const Frontier f = pareto_frontier(ride);
    const SolveResult res = solve(game, config);
    const double base = no_info_value(game, game.prior());
    const double mu = ride.mu0[0];

    CrosscheckReport rep;
    rep.solver_value = res.surface.evaluate(game.prior(), 0.0);
    rep.closed_form_value = f.origin_value;
    rep.value_gap = std::abs(rep.solver_value - rep.closed_form_value);
    rep.solver_slope = (res.surface.evaluate(game.prior(), base + mu) - res.surface.evaluate(game.prior(), base)) / mu;
    rep.closed_form_slope = (f.value_at(mu) - f.value_at(0.0)) / mu;
    rep.slope_gap = std::abs(rep.solver_slope - rep.closed_form_slope);
    rep.tail_slope = right_derivative(res.surface, base + mu, game.prior());
    rep.max_deviation = std::max({rep.value_gap, rep.slope_gap, std::abs(rep.tail_slope + ride.k)});
    rep.grid_tolerance = 10.0 * config.tolerance / (1.0 - ride.discount) + 1e-6;
    return rep;
}

}  // namespace dyncontract
