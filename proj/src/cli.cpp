#include "dyncontract/cli.hpp"

#include "dyncontract/analysis.hpp"
#include "dyncontract/dynamic_solver.hpp"
#include "dyncontract/game_io.hpp"
#include "dyncontract/loyalty.hpp"
#include "dyncontract/piecewise.hpp"
#include "dyncontract/static_solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace dyncontract::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCommands{"static-solve", "dynamic-solve", "analyze",  "ergodic-bound",
                                         "loyalty",      "verify-backloading", "playout"};

void build_app(CLI::App& app, RunManifest& m) {
    app.add_option("command", m.command, "command to run")->required()->check(CLI::IsMember(kCommands));
    app.add_option("--input", m.input, "game or ride specification (JSON)");
    app.add_option("--out", m.out, "output directory");
    app.add_option("--belief-grid", m.belief_grid, "lattice steps per simplex edge");
    app.add_option("--promise-grid", m.promise_grid, "number of promise knots");
    app.add_option("--tol", m.tolerance, "value iteration tolerance");
    app.add_option("--max-iter", m.max_iterations, "value iteration budget");
    app.add_option("--seed", m.seed, "random seed");
    app.add_option("--delta", m.delta, "discount override");
    app.add_option("--k", m.k, "transfer cost override");
    app.add_option("--horizon", m.horizon, "simulated periods");
    app.add_option("--n", m.n, "rides per period (loyalty)");
    app.add_option("--c", m.c, "ride values (loyalty)")->delimiter(',');
    app.add_option("--mu0", m.mu0, "ride priors (loyalty)")->delimiter(',');
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

json manifest_json(const RunManifest& m) {
    json j;
    j["command"] = m.command;
    j["input"] = m.input;
    if (m.belief_grid) j["belief_grid"] = *m.belief_grid;
    if (m.promise_grid) j["promise_grid"] = *m.promise_grid;
    if (m.tolerance) j["tolerance"] = *m.tolerance;
    if (m.max_iterations) j["max_iterations"] = *m.max_iterations;
    j["seed"] = m.seed;
    if (m.delta) j["delta"] = *m.delta;
    if (m.k) j["k"] = *m.k;
    j["horizon"] = m.horizon;
    if (m.n) j["n"] = *m.n;
    if (!m.c.empty()) j["c"] = m.c;
    if (!m.mu0.empty()) j["mu0"] = m.mu0;
    return j;
}

std::string config_hash(const RunManifest& m) {
    std::string bytes = manifest_json(m).dump();
    if (!m.input.empty()) {
        std::ifstream in(m.input, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        bytes += ss.str();
    }
    return hex64(fnv1a(bytes));
}

class Output {
public:
    explicit Output(const fs::path& dir) : dir_(dir) { fs::create_directories(dir_); }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream f(dir_ / name, std::ios::binary);
        if (!f) throw Error("cannot write " + (dir_ / name).string());
        f << text;
    }
    void write_json(const std::string& name, const json& j) const { write(name, j.dump(2) + "\n"); }

private:
    fs::path dir_;
};

struct Outcome {
    json headline = json::object();
    json invariants = json::object();
};

bool all_pass(const json& invariants) {
    for (const auto& [key, val] : invariants.items())
        if (val.is_boolean() && !val.get<bool>()) return false;
    return true;
}

DiscountedGame load_game(const RunManifest& m) {
    if (m.input.empty()) throw InvalidInput("--input is required for " + m.command);
    json j = read_json_file(m.input);
    if (m.delta) j["discount"] = *m.delta;
    if (m.k) j["k"] = *m.k;
    if (m.delta && j.contains("promise_bound")) j.erase("promise_bound");
    return game_from_json(j);
}

SolverConfig solver_config(const DiscountedGame& game, const RunManifest& m) {
    SolverConfig cfg = make_solver_config(game, m.belief_grid.value_or(8), m.promise_grid.value_or(48));
    if (m.tolerance) cfg.tolerance = *m.tolerance;
    if (m.max_iterations) cfg.max_iterations = *m.max_iterations;
    return cfg;
}

json atom_json(const ContractAtom& a) {
    return {{"belief", belief_to_json(a.belief)},
            {"action", a.action},
            {"transfer", a.transfer},
            {"promise", a.promise},
            {"weight", a.weight}};
}

std::string belief_cells(const Belief& b) {
    std::string s;
    for (std::size_t i = 0; i < b.size(); ++i) s += "," + num(b[i]);
    return s;
}

std::string belief_header(const StageGame& g, const std::string& prefix) {
    std::string s;
    for (const auto& name : g.states()) s += "," + prefix + name;
    return s;
}

// ---------------------------------------------------------------- commands

Outcome static_solve(const RunManifest& m, const Output& out) {
    const DiscountedGame game = load_game(m);
    const StageGame& st = game.stage();
    const auto K = extremal_beliefs(st);
    const StaticSolution sol = k_cavify(st, K, game.prior());
    const double po = persuasion_only_value(st, K, game.prior());

    json j;
    j["value"] = sol.value;
    j["persuasion_only_value"] = po;
    j["extremal_beliefs"] = json::array();
    for (const auto& b : K.beliefs) j["extremal_beliefs"].push_back(belief_to_json(b));
    j["atoms"] = json::array();
    for (const auto& a : sol.atoms)
        j["atoms"].push_back({{"belief", belief_to_json(a.belief)},
                              {"weight", a.weight},
                              {"action", a.action},
                              {"transfer", a.transfer},
                              {"sender_value", a.sender_value},
                              {"receiver_value", a.receiver_value}});
    out.write_json("static.json", j);

    if (st.num_states() <= 3) {
        std::string csv = belief_header(st, "p_") + ",V0,Vt,cav_V0,cavK_Vt\n";
        csv.erase(0, 1);
        for (const auto& r : envelope_table(st, m.belief_grid.value_or(8))) {
            std::string line = belief_cells(r.belief);
            line.erase(0, 1);
            csv += line + "," + num(r.v0) + "," + num(r.vt) + "," + num(r.cav_v0) + "," + num(r.cav_vt) + "\n";
        }
        out.write("envelope.csv", csv);
    }

    Outcome o;
    o.headline = {{"value", sol.value}, {"persuasion_only_value", po}, {"atoms", sol.atoms.size()}};
    double obedience = INFINITY, weight = 0.0;
    for (const auto& a : sol.atoms) {
        obedience = std::min(obedience, a.receiver_value - myopic_receiver_value(st, a.belief));
        weight += a.weight;
    }
    o.invariants["bayes_plausible"] = bayes_plausible(sol.experiment(), game.prior());
    o.invariants["obedient"] = obedience >= -1e-9;
    o.invariants["weights_sum_to_one"] = std::abs(weight - 1.0) <= 1e-9;
    o.invariants["transfers_help"] = sol.value >= po - 1e-9;
    return o;
}

json surface_invariants(const DiscountedGame& game, const SolveResult& res) {
    bool concave = true, nonincreasing = true, slopes = true;
    const auto& x = res.surface.promises();
    for (std::size_t b = 0; b < res.surface.beliefs().size(); ++b) {
        const auto& y = res.surface.row(b);
        concave = concave && is_concave(x, y, 1e-7);
        for (std::size_t p = 0; p + 1 < x.size(); ++p) {
            if (!std::isfinite(y[p]) || !std::isfinite(y[p + 1])) continue;
            const double s = (y[p + 1] - y[p]) / (x[p + 1] - x[p]);
            nonincreasing = nonincreasing && s <= 1e-7;
            slopes = slopes && s >= -game.k() - 1e-6;
        }
    }
    return {{"concave", concave},
            {"nonincreasing", nonincreasing},
            {"slopes_at_least_minus_k", slopes},
            {"contraction", res.contraction_ratio <= game.discount() + 1e-3}};
}

void write_solution(const Output& out, const DiscountedGame& game, const SolveResult& res) {
    const StageGame& st = game.stage();
    std::string csv = "belief_id" + belief_header(st, "p_") + ",promise,value\n";
    const auto& x = res.surface.promises();
    for (std::size_t b = 0; b < res.surface.beliefs().size(); ++b)
        for (std::size_t p = 0; p < x.size(); ++p)
            csv += std::to_string(b) + belief_cells(res.surface.beliefs()[b]) + "," + num(x[p]) + "," +
                   num(res.surface.value(b, p)) + "\n";
    out.write("surface.csv", csv);

    json pol = json::array();
    for (std::size_t b = 0; b < res.surface.beliefs().size(); ++b)
        for (std::size_t p = 0; p < x.size(); ++p) {
            json atoms = json::array();
            for (const auto& a : res.policy.at(b, p)) atoms.push_back(atom_json(a));
            pol.push_back({{"belief_id", b}, {"promise", x[p]}, {"atoms", atoms}});
        }
    out.write_json("policy.json", pol);

    std::string log = "iteration,delta\n";
    for (std::size_t i = 0; i < res.deltas.size(); ++i) log += std::to_string(i + 1) + "," + num(res.deltas[i]) + "\n";
    out.write("convergence.csv", log);
}

Outcome dynamic_solve(const RunManifest& m, const Output& out) {
    const DiscountedGame game = load_game(m);
    const SolverConfig cfg = solver_config(game, m);
    const SolveResult res = solve(game, cfg);
    write_solution(out, game, res);
    Outcome o;
    o.headline = {{"value_at_prior", res.surface.evaluate(game.prior(), 0.0)},
                  {"iterations", res.iterations},
                  {"contraction_ratio", res.contraction_ratio},
                  {"interpolation_spread", res.interpolation_spread},
                  {"belief_points", cfg.belief_grid.size()},
                  {"promise_points", cfg.promise_grid.size()}};
    o.invariants = surface_invariants(game, res);
    return o;
}

json coupling_json(const ErgodicCoupling& e) {
    return {{"value", e.value},
            {"gamma", matrix_to_json(e.gamma)},
            {"m", e.payment},
            {"stationary", belief_to_json(e.stationary)},
            {"outside_option", e.outside_option}};
}

json coupling_invariants(const DiscountedGame& game, const ErgodicCoupling& e) {
    const Vector marg = e.gamma.rowwise().sum();
    double eu = e.payment;
    for (Eigen::Index s = 0; s < e.gamma.rows(); ++s)
        for (Eigen::Index a = 0; a < e.gamma.cols(); ++a)
            eu += e.gamma(s, a) * game.stage().u(std::size_t(a), std::size_t(s));
    return {{"marginal_matches_stationary", (marg - e.stationary.probabilities()).cwiseAbs().maxCoeff() <= 1e-9},
            {"individually_rational", eu >= e.outside_option - 1e-9}};
}

Outcome ergodic(const RunManifest& m, const Output& out) {
    const DiscountedGame game = load_game(m);
    const ErgodicCoupling e = ergodic_bound(game);
    out.write_json("ergodic.json", coupling_json(e));
    Outcome o;
    o.headline = {{"value", e.value}, {"m", e.payment}};
    o.invariants = coupling_invariants(game, e);
    return o;
}

Outcome analyze(const RunManifest& m, const Output& out) {
    const DiscountedGame game = load_game(m);
    const StageGame& st = game.stage();
    const SolverConfig cfg = solver_config(game, m);
    const SolveResult res = solve(game, cfg);

    json j;
    j["feasibly_optimal"] = feasibly_optimal_set(st);
    j["nontrivial"] = is_nontrivial(game, res.surface);
    j["incentivizable_static"] = is_incentivizable_static(st, game.prior());
    const DynamicsBenefit dyn = dynamics_benefit(st, game.prior());
    j["benefits_from_dynamics"] = dyn.benefits;
    j["dynamics_detail"] = {{"receiver_surplus", dyn.receiver_surplus},
                            {"static_value", dyn.static_value},
                            {"first_best", dyn.first_best}};
    Outcome o;
    try {
        const ErgodicCoupling e = ergodic_bound(game);
        j["ergodic_bound"] = coupling_json(e);
        const json inv = coupling_invariants(game, e);
        for (const auto& [key, val] : inv.items()) o.invariants["ergodic_" + key] = val;
    } catch (const NotErgodic& e) {
        j["ergodic_bound"] = {{"error", e.what()}};
    }
    const RegionReport region = effectiveness_region_check(st, {0.5 * st.k(), st.k(), 2.0 * st.k()}, 1000, m.seed);
    json viol = json::array();
    for (const auto& v : region.violations)
        viol.push_back({{"kind", v.kind}, {"k", v.k}, {"first", belief_to_json(v.first)}, {"second", belief_to_json(v.second)}});
    j["effectiveness_region"] = {{"k", region.k_values},
                                 {"violations", viol},
                                 {"convexity_checks", region.convexity_checks},
                                 {"nesting_checks", region.nesting_checks}};
    const PolicyAudit fo = audit_feasibly_optimal(st, res.policy);
    const PolicyAudit er = audit_effectiveness(game, res.surface, res.policy);
    j["audits"] = {{"feasibly_optimal", {{"checked", fo.atoms_checked}, {"violations", fo.violations}}},
                   {"effectiveness",
                    {{"checked", er.atoms_checked}, {"violations", er.violations}, {"boundary_hits", er.boundary_hits}}}};
    out.write_json("analysis.json", j);

    o.headline = {{"value_at_prior", res.surface.evaluate(game.prior(), 0.0)},
                  {"feasibly_optimal", j["feasibly_optimal"]},
                  {"nontrivial", j["nontrivial"]},
                  {"incentivizable_static", j["incentivizable_static"]},
                  {"benefits_from_dynamics", dyn.benefits}};
    o.invariants["region_convex_and_nested"] = region.violations.empty();
    o.invariants["policy_actions_feasibly_optimal"] = fo.passed();
    o.invariants["post_payment_beliefs_outside_region"] = er.passed();
    return o;
}

Outcome backloading(const RunManifest& m, const Output& out) {
    const DiscountedGame game = load_game(m);
    const SolverConfig cfg = solver_config(game, m);
    const SolveResult res = solve(game, cfg);
    const BackloadingReport rep = verify_backloading(game, res.surface, res.policy, cfg);
    json checks = json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"belief_id", c.belief_index},
                          {"promise", cfg.promise_grid[c.promise_index]},
                          {"transfer", c.transfer},
                          {"continuation_promise", c.continuation_promise},
                          {"slope", c.slope},
                          {"slope_ok", c.slope_ok},
                          {"value", c.value},
                          {"restricted_value", c.restricted_value},
                          {"witness_ok", c.witness_ok}});
    out.write_json("backloading.json", {{"passed", rep.passed}, {"failures", rep.failures}, {"checks", checks}});
    Outcome o;
    o.headline = {{"paying_points", rep.checks.size()}, {"failures", rep.failures}};
    o.invariants["backloading"] = rep.passed;
    return o;
}

Outcome play(const RunManifest& m, const Output& out) {
    const DiscountedGame game = load_game(m);
    const SolverConfig cfg = solver_config(game, m);
    const SolveResult res = solve(game, cfg);
    const History h = playout(game, res.surface, res.policy, m.seed, m.horizon);
    const StageGame& st = game.stage();
    std::string csv = "period,belief_id" + belief_header(st, "prior_") + ",promise,snap_error" +
                      belief_header(st, "posterior_") +
                      ",action,transfer,continuation,state,sender_flow,receiver_flow,sender_discounted,"
                      "receiver_discounted,obedience\n";
    for (const auto& r : h.records)
        csv += std::to_string(r.period) + "," + std::to_string(r.belief_index) + belief_cells(r.prior) + "," +
               num(r.promise) + "," + num(r.snap_error) + belief_cells(r.atom.belief) + "," + st.actions()[r.atom.action] +
               "," + num(r.atom.transfer) + "," + num(r.atom.promise) + "," + st.states()[r.state] + "," +
               num(r.sender_flow) + "," + num(r.receiver_flow) + "," + num(r.sender_discounted) + "," +
               num(r.receiver_discounted) + "," + num(r.obedience) + "\n";
    out.write("history.csv", csv);
    Outcome o;
    o.headline = {{"sender_discounted", h.sender_discounted},
                  {"receiver_discounted", h.receiver_discounted},
                  {"value_at_prior", res.surface.evaluate(game.prior(), 0.0)},
                  {"min_obedience_residual", h.records.empty() ? 0.0 : h.min_obedience},
                  {"max_snap_error", h.max_snap_error}};
    o.invariants["obedient"] = h.records.empty() || h.min_obedience >= -1e-7;
    return o;
}

RideGame load_ride(const RunManifest& m) {
    RideGame r;
    if (!m.input.empty()) r = ride_from_json(read_json_file(m.input));
    if (!m.c.empty()) r.c = m.c;
    if (!m.mu0.empty()) r.mu0 = m.mu0;
    if (m.k) r.k = *m.k;
    if (m.delta) r.discount = *m.delta;
    r.n = m.n.value_or(r.c.size());
    r.validate();
    return r;
}

Outcome loyalty(const RunManifest& m, const Output& out) {
    const RideGame ride = load_ride(m);
    const Frontier f = pareto_frontier(ride);
    const TierSchedule sched = tier_schedule(ride);

    std::string csv = "surplus,value\n";
    for (const auto& [x, y] : f.knots()) csv += num(x) + "," + num(y) + "\n";
    out.write("frontier.csv", csv);

    json segs = json::array();
    for (const auto& s : f.segments)
        segs.push_back({{"slope", s.slope}, {"length", std::isfinite(s.length) ? json(s.length) : json(nullptr)}});
    out.write_json("schedule.json", {{"ride", ride_to_json(ride)},
                                     {"origin_value", f.origin_value},
                                     {"segments", segs},
                                     {"thresholds", sched.thresholds},
                                     {"order", sched.order},
                                     {"knee", sched.knee},
                                     {"no_dynamic_incentives", sched.no_dynamic_incentives}});

    Outcome o;
    json slopes = json::array();
    for (const auto& s : f.segments) slopes.push_back(s.slope);
    o.headline = {{"origin_value", f.origin_value},
                  {"slopes", slopes},
                  {"knots", f.knots().size()},
                  {"no_dynamic_incentives", sched.no_dynamic_incentives}};
    bool concave = true;
    for (std::size_t i = 1; i < f.segments.size(); ++i) concave = concave && f.segments[i].slope <= f.segments[i - 1].slope;
    o.invariants["frontier_concave"] = concave;

    if (std::any_of(ride.c.begin(), ride.c.end(), [&](double c) { return c > ride.k; })) {
        const LoyaltyHistory h = simulate_loyalty(ride, m.seed, m.horizon);
        std::string hist = "period,ledger";
        for (std::size_t i = 0; i < ride.n; ++i) {
            const std::string d = std::to_string(i);
            hist += ",state_" + d + ",posterior_" + d + ",action_" + d + ",transfer_" + d + ",promoted_" + d +
                    ",promotion_" + d;
        }
        hist += ",sender_flow,receiver_flow\n";
        for (const auto& p : h.periods) {
            hist += std::to_string(p.period) + "," + num(p.ledger);
            for (std::size_t i = 0; i < ride.n; ++i)
                hist += "," + std::to_string(p.state[i]) + "," + num(p.posterior[i]) + "," + std::to_string(p.action[i]) +
                        "," + num(p.transfer[i]) + "," + (p.promoted[i] ? "1" : "0") + "," +
                        (p.promoted_now[i] ? "1" : "0");
            hist += "," + num(p.sender_flow) + "," + num(p.receiver_flow) + "\n";
        }
        out.write("history.csv", hist);

        bool ordered = true;
        for (std::size_t i = 0; i < ride.n; ++i)
            for (std::size_t j = 0; j < ride.n; ++j)
                if (ride.c[i] < ride.c[j] && ride.c[j] < ride.k && h.promotion_time[j] >= 0)
                    ordered = ordered && h.promotion_time[i] >= 0 && h.promotion_time[i] <= h.promotion_time[j];
        o.headline["promotion_times"] = h.promotion_time;
        o.headline["sender_discounted"] = h.sender_discounted;
        o.invariants["good_rides_never_rejected"] = h.good_rides_rejected == 0;
        o.invariants["promotions_ordered"] = ordered;
        o.invariants["transfers_only_after_promotion"] = h.transfers_before_promotion == 0;
    }
    return o;
}

void write_summary(const Output& out, const RunManifest& m, const Outcome& o, const std::string& status,
                   const std::string& error) {
    json s;
    s["command"] = m.command;
    s["config_hash"] = config_hash(m);
    s["status"] = status;
    s["headline"] = o.headline;
    s["invariants"] = o.invariants;
    s["invariants_passed"] = all_pass(o.invariants);
    if (!error.empty()) s["error"] = error;
    out.write_json("summary.json", s);
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RunManifest parse_arguments(int argc, const char* const* argv) {
    RunManifest m;
    CLI::App app{"Persuasion and transfers: static and dynamic contract solver"};
    build_app(app, m);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        throw InvalidInput(e.what());
    }
    return m;
}

int run(const RunManifest& m) {
    const Output out(m.out);
    Outcome o;
    try {
        if (m.command == "static-solve") o = static_solve(m, out);
        else if (m.command == "dynamic-solve") o = dynamic_solve(m, out);
        else if (m.command == "analyze") o = analyze(m, out);
        else if (m.command == "ergodic-bound") o = ergodic(m, out);
        else if (m.command == "loyalty") o = loyalty(m, out);
        else if (m.command == "verify-backloading") o = backloading(m, out);
        else if (m.command == "playout") o = play(m, out);
        else throw InvalidInput("unknown command " + m.command);
    } catch (const InvalidInput& e) {
        write_summary(out, m, o, "parse_error", e.what());
        std::cerr << "error: " << e.what() << "\n";
        return parse_error;
    } catch (const NoConvergence& e) {
        write_summary(out, m, o, "no_convergence", e.what());
        std::cerr << "error: " << e.what() << "\n";
        return no_convergence;
    } catch (const std::exception& e) {
        write_summary(out, m, o, "failure", e.what());
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
    const bool passed = all_pass(o.invariants);
    write_summary(out, m, o, passed ? "ok" : "invariant_failure", "");
    std::cout << o.headline.dump() << "\n";
    return passed ? ok : invariant_failure;
}

int main(int argc, const char* const* argv) {
    RunManifest m;
    CLI::App app{"Persuasion and transfers: static and dynamic contract solver"};
    build_app(app, m);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return parse_error;
    }
    try {
        return run(m);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
}

}  // namespace dyncontract::cli
