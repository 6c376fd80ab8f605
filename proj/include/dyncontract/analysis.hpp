#pragma once

#include "dyncontract/dynamic_solver.hpp"
#include "dyncontract/game.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dyncontract {

/// Actions not excluded by any a': min_theta[v(a') - v(a)] > k max_theta[u(a) - u(a')].
std::vector<std::size_t> feasibly_optimal_set(const StageGame& game);

/// Sender loss over Receiver gain from replacing `belief` with full revelation,
/// minimized over the feasibly optimal set. Throws DegenerateDenominator when
/// the Receiver gain is at most 1e-12.
double effectiveness_ratio(const StageGame& game, const Belief& belief);

/// Membership in E(k): interior belief with ratio > -k + 1e-9. The feasibly
/// optimal set is taken at the game's own k.
bool in_effectiveness_region(const StageGame& game, const Belief& belief, double k);

struct RegionViolation {
    std::string kind;  // "convexity" or "nesting"
    double k = 0.0;
    Belief first;
    Belief second;
};

struct RegionReport {
    std::vector<double> k_values;
    std::size_t draws = 0;
    std::size_t convexity_checks = 0;
    std::size_t nesting_checks = 0;
    std::vector<RegionViolation> violations;
};

RegionReport effectiveness_region_check(const StageGame& game, std::vector<double> k_values, std::size_t samples,
                                        std::uint64_t seed);

bool is_nontrivial(const DiscountedGame& game, const ValueSurface& V);
bool is_incentivizable_static(const StageGame& game, const Belief& prior);

struct ErgodicCoupling {
    Matrix gamma;  // |S| x |A|
    double payment = 0.0;
    double value = 0.0;
    Belief stationary;
    double outside_option = 0.0;
};

ErgodicCoupling ergodic_bound(const DiscountedGame& game);

struct DynamicsBenefit {
    double receiver_surplus = 0.0;  // static Receiver value over the no-information value
    double static_value = 0.0;
    double first_best = 0.0;
    bool benefits = false;
};

DynamicsBenefit dynamics_benefit(const StageGame& game, const Belief& prior);
bool benefits_from_dynamics(const StageGame& game, const Belief& prior);

struct PolicyAudit {
    std::size_t atoms_checked = 0;
    std::size_t violations = 0;
    std::size_t boundary_hits = 0;
    std::vector<std::string> notes;
    bool passed() const { return violations == 0; }
};

/// Every action played with weight > 1e-7 lies in the feasibly optimal set.
PolicyAudit audit_feasibly_optimal(const StageGame& game, const PolicyTable& policy);

/// After a paying atom, the beliefs supported at the successor grid point lie
/// outside E(k): degenerate, denominator-degenerate or ratio <= -k + 1e-4.
PolicyAudit audit_effectiveness(const DiscountedGame& game, const ValueSurface& V, const PolicyTable& policy);

}  // namespace dyncontract
