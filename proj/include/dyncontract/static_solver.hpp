#pragma once

#include "dyncontract/game.hpp"

#include <cstddef>
#include <vector>

namespace dyncontract {

struct ActionPolytope {
    std::size_t action = 0;
    std::vector<Belief> vertices;  // empty when the action is never optimal
};

struct ExtremalBeliefSet {
    std::vector<Belief> beliefs;
};

struct CanonicalTransfer {
    std::size_t action = 0;
    double transfer = 0.0;
};

struct StaticAtom {
    Belief belief;
    double weight = 0.0;
    std::size_t action = 0;
    double transfer = 0.0;
    double sender_value = 0.0;    // E[v] - k t
    double receiver_value = 0.0;  // E[u] + t
};

struct StaticSolution {
    double value = 0.0;
    std::vector<StaticAtom> atoms;

    Experiment experiment() const;
    double receiver_value() const;
};

struct EnvelopeRow {
    Belief belief;
    double v0 = 0.0;
    double vt = 0.0;
    double cav_v0 = 0.0;
    double cav_vt = 0.0;
};

ActionPolytope action_polytope(const StageGame& game, std::size_t a);
ExtremalBeliefSet extremal_beliefs(const StageGame& game);

CanonicalTransfer canonical_transfer(const StageGame& game, const Belief& belief);
double transfer_augmented_value(const StageGame& game, const Belief& belief);
/// Sender's value without transfers, Receiver ties broken for the Sender.
double persuasion_stage_value(const StageGame& game, const Belief& belief);

StaticSolution k_cavify(const StageGame& game, const Belief& prior);
StaticSolution k_cavify(const StageGame& game, const ExtremalBeliefSet& K, const Belief& prior);
double persuasion_only_value(const StageGame& game, const Belief& prior);
double persuasion_only_value(const StageGame& game, const ExtremalBeliefSet& K, const Belief& prior);

/// Simplex lattice with `resolution` steps per edge, ordered lexicographically.
std::vector<Belief> simplex_lattice(std::size_t num_states, std::size_t resolution);

std::vector<EnvelopeRow> envelope_table(const StageGame& game, std::size_t resolution);

/// Sorts beliefs by the last coordinate, then the one before, and so on.
bool belief_order(const Belief& a, const Belief& b);
void sort_and_dedupe(std::vector<Belief>& beliefs, double tol = 1e-9);

}  // namespace dyncontract
