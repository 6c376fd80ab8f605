#pragma once

#include "dyncontract/dynamic_solver.hpp"
#include "dyncontract/game.hpp"

#include <cstdint>
#include <vector>

namespace dyncontract {

/// n independent rides per period; ride i is good with probability mu0[i] and
/// worth c[i] to the Sender when accepted.
struct RideGame {
    std::size_t n = 1;
    std::vector<double> c;
    std::vector<double> mu0;
    double k = 1.0;
    double discount = 0.9;

    void validate() const;
    /// Single-ride game for dimension i.
    RideGame dimension(std::size_t i) const;
};

/// Product game; state and action bit i belong to ride i.
DiscountedGame build_ride_game(const RideGame& ride);

struct FrontierSegment {
    double slope = 0.0;
    double length = 0.0;  // INFINITY for the terminal -k segment
    std::size_t dimension = 0;
};

/// Per-period Sender value against Receiver surplus over the no-information value.
struct Frontier {
    double origin_value = 0.0;
    std::vector<FrontierSegment> segments;

    double value_at(double surplus) const;
    /// (surplus, value) at the origin and every finite knot.
    std::vector<std::pair<double, double>> knots() const;
};

Frontier pareto_frontier(const RideGame& ride);

struct TierSchedule {
    std::vector<double> thresholds;         // per dimension
    std::vector<std::size_t> order;         // promotion order
    double knee = 0.0;                      // start of the -k segment
    bool no_dynamic_incentives = false;
};

TierSchedule tier_schedule(const RideGame& ride);

struct LoyaltyPeriod {
    int period = 0;
    std::vector<int> state;
    std::vector<double> posterior;
    std::vector<int> action;
    std::vector<double> transfer;
    std::vector<bool> promoted;
    std::vector<bool> promoted_now;
    double ledger = 0.0;  // promised surplus at the start of the period
    double sender_flow = 0.0;
    double receiver_flow = 0.0;
};

struct LoyaltyHistory {
    std::vector<LoyaltyPeriod> periods;
    std::vector<int> promotion_time;  // -1 when never promoted
    std::size_t good_rides = 0;
    std::size_t good_rides_rejected = 0;
    std::size_t transfers_before_promotion = 0;
    double sender_discounted = 0.0;
    double receiver_discounted = 0.0;
};

LoyaltyHistory simulate_loyalty(const RideGame& ride, std::uint64_t seed, int horizon);

struct CrosscheckReport {
    double solver_value = 0.0;        // V(0, mu0)
    double closed_form_value = 0.0;   // frontier origin
    double value_gap = 0.0;
    double solver_slope = 0.0;        // over surplus (0, mu0)
    double closed_form_slope = 0.0;
    double slope_gap = 0.0;
    double tail_slope = 0.0;          // beyond surplus mu0
    double max_deviation = 0.0;
    double grid_tolerance = 0.0;
};

/// Single-ride comparison of the closed-form frontier with the dynamic solver.
/// The config's promise grid must contain the no-information value and the
/// no-information value plus mu0; make_ride_config builds one.
CrosscheckReport crosscheck(const RideGame& ride, const SolverConfig& config);
SolverConfig make_ride_config(const RideGame& ride, std::size_t belief_resolution = 8, std::size_t promise_points = 48);

}  // namespace dyncontract
