#pragma once

#include "dyncontract/game.hpp"

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace dyncontract {

struct SolverConfig {
    std::vector<Belief> belief_grid;
    std::vector<double> promise_grid;
    double tolerance = 1e-8;
    int max_iterations = 10'000;
    /// Steps per simplex edge of the regular lattice inside belief_grid; used
    /// to triangulate continuation beliefs of non-i.i.d. chains.
    std::size_t lattice_resolution = 0;
};

/// Grid with the prior, degenerate and extremal beliefs plus a regular
/// lattice; promise grid dense around [-u^RFI, u^RFI] with sparse tails to +-C.
SolverConfig make_solver_config(const DiscountedGame& game, std::size_t belief_resolution = 8,
                                std::size_t promise_points = 48, const std::vector<double>& extra_promises = {});

void validate_config(const DiscountedGame& game, const SolverConfig& config);

class ValueSurface {
public:
    ValueSurface() = default;
    ValueSurface(std::vector<Belief> beliefs, std::vector<double> promises, std::vector<std::vector<double>> values);
    static ValueSurface constant(const SolverConfig& config, double c);

    const std::vector<Belief>& beliefs() const { return beliefs_; }
    const std::vector<double>& promises() const { return promises_; }
    const std::vector<double>& row(std::size_t b) const { return values_.at(b); }
    std::vector<double>& row(std::size_t b) { return values_.at(b); }
    double value(std::size_t b, std::size_t p) const { return values_.at(b).at(p); }

    /// Index of a grid belief; throws OutOfRange when absent.
    std::size_t belief_index(const Belief& mu, double tol = 1e-9) const;
    std::size_t nearest_belief(const Belief& mu) const;
    std::size_t nearest_promise(double u) const;
    double evaluate(std::size_t b, double u) const;
    double evaluate(const Belief& mu, double u) const { return evaluate(belief_index(mu), u); }

    double sup_distance(const ValueSurface& other) const;

private:
    std::vector<Belief> beliefs_;
    std::vector<double> promises_;
    std::vector<std::vector<double>> values_;
};

/// Per (belief, promise): atoms with weights summing to one; empty if infeasible.
class PolicyTable {
public:
    PolicyTable() = default;
    PolicyTable(std::size_t beliefs, std::size_t promises) : promises_(promises), cells_(beliefs * promises) {}

    std::vector<ContractAtom>& at(std::size_t b, std::size_t p) { return cells_.at(b * promises_ + p); }
    const std::vector<ContractAtom>& at(std::size_t b, std::size_t p) const { return cells_.at(b * promises_ + p); }
    std::size_t num_beliefs() const { return promises_ == 0 ? 0 : cells_.size() / promises_; }
    std::size_t num_promises() const { return promises_; }

private:
    std::size_t promises_ = 0;
    std::vector<std::vector<ContractAtom>> cells_;
};

struct SolveResult {
    ValueSurface surface;
    PolicyTable policy;
    std::vector<double> deltas;  // sup-norm change per iteration
    int iterations = 0;
    double contraction_ratio = 0.0;
    /// Largest distance from a continuation belief to a triangulation vertex it draws on.
    double interpolation_spread = 0.0;
};

ValueSurface bellman_step(const DiscountedGame& game, const ValueSurface& V, const SolverConfig& config);
/// Same operator, also returning the maximizing atoms.
ValueSurface bellman_step(const DiscountedGame& game, const ValueSurface& V, const SolverConfig& config,
                          PolicyTable* policy);

SolveResult solve(const DiscountedGame& game, const SolverConfig& config);
/// Fixed point of the operator restricted to degenerate posteriors.
SolveResult solve_full_revelation(const DiscountedGame& game, const SolverConfig& config);

double right_derivative(const ValueSurface& V, double u, const Belief& belief);

/// Slack of the obedience constraint of one atom against its best deviation.
double obedience_residual(const DiscountedGame& game, const ContractAtom& atom);
double promise_keeping_residual(const DiscountedGame& game, const std::vector<ContractAtom>& atoms, double promise);

struct PullbackStrategy {
    std::vector<Matrix> action_given_state;  // per period, |S| x |A|; last entry repeats
    Matrix transfers;                        // |S| x |A|
};

struct PullbackResult {
    PullbackStrategy strategy;
    double sender_cost = 0.0;
    double receiver_value = 0.0;     // discounted E_Q[u] of the target
    double full_info_value = 0.0;
    double accounting_gap = 0.0;     // sender_cost - k (u^RFI - base)
    std::vector<Matrix> realized_marginals;
};

/// Targets are joint (state, action) distributions; entry xi applies at period
/// xi and the last one applies at every later period.
PullbackResult pullback(const DiscountedGame& game, const std::vector<Matrix>& target_marginals,
                        double base_receiver_value);

struct PullbackStep {
    int period = 0;
    std::size_t state = 0;
    std::size_t action = 0;
    double transfer = 0.0;
};

std::vector<PullbackStep> simulate_pullback(const DiscountedGame& game, const PullbackStrategy& strategy,
                                            std::uint64_t seed, int horizon);

struct BackloadingCheck {
    std::size_t belief_index = 0;
    std::size_t promise_index = 0;
    std::size_t atom_index = 0;
    double transfer = 0.0;
    double continuation_promise = 0.0;
    double slope = 0.0;
    double slope_residual = 0.0;  // slope + k
    bool slope_ok = false;
    double value = 0.0;
    double restricted_value = 0.0;
    bool witness_ok = false;
};

struct BackloadingReport {
    std::vector<BackloadingCheck> checks;
    bool passed = true;
    std::size_t failures = 0;
};

BackloadingReport verify_backloading(const DiscountedGame& game, const ValueSurface& V, const PolicyTable& policy,
                                     const SolverConfig& config);

struct HistoryRecord {
    int period = 0;
    std::size_t belief_index = 0;
    Belief prior;
    double promise = 0.0;
    double snap_error = 0.0;
    ContractAtom atom;
    std::size_t state = 0;
    double sender_flow = 0.0;
    double receiver_flow = 0.0;
    double sender_discounted = 0.0;
    double receiver_discounted = 0.0;
    double obedience = 0.0;
};

struct History {
    std::vector<HistoryRecord> records;
    double sender_discounted = 0.0;
    double receiver_discounted = 0.0;
    double max_snap_error = 0.0;
    double min_obedience = INFINITY;
};

History playout(const DiscountedGame& game, const ValueSurface& V, const PolicyTable& policy, std::uint64_t seed,
                int horizon);

/// Uniform draw on [0, 1) from a 64-bit generator.
double unit_draw(std::uint64_t bits);

}  // namespace dyncontract
