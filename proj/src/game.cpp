#include "dyncontract/game.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace dyncontract {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidInput(what);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

Belief::Belief(Vector p) : p_(std::move(p)) {
    require(p_.size() >= 1, "belief must be non-empty");
    require(p_.allFinite(), "belief entries must be finite");
    require(p_.minCoeff() >= 0.0, "belief entries must be nonnegative");
    require(std::abs(p_.sum() - 1.0) <= 1e-12, "belief must sum to one");
}

Belief Belief::normalized(Vector p, double tol) {
    require(p.allFinite(), "belief entries must be finite");
    for (auto& x : p) {
        require(x >= -tol, "belief entry is negative");
        x = std::max(x, 0.0);
    }
    double s = p.sum();
    require(std::abs(s - 1.0) <= tol, "belief does not sum to one");
    p /= s;
    p[0] += 1.0 - p.sum();
    if (p[0] < 0.0) p[0] = 0.0;
    return Belief(std::move(p));
}

Belief Belief::degenerate(std::size_t n, std::size_t state) {
    require(state < n, "state index out of range");
    Vector p = Vector::Zero(Eigen::Index(n));
    p[Eigen::Index(state)] = 1.0;
    return Belief(std::move(p));
}

Belief Belief::uniform(std::size_t n) {
    return normalized(Vector::Constant(Eigen::Index(n), 1.0 / double(n)));
}

Belief Belief::binary(double p1) {
    Vector p(2);
    p << 1.0 - p1, p1;
    return normalized(std::move(p));
}

bool Belief::is_degenerate(double tol) const { return p_.maxCoeff() >= 1.0 - tol; }

bool Belief::is_interior(double tol) const { return p_.minCoeff() > tol; }

double Belief::sup_distance(const Belief& other) const {
    require(other.size() == size(), "belief dimension mismatch");
    return (p_ - other.p_).cwiseAbs().maxCoeff();
}

StageGame::StageGame(std::vector<std::string> states, std::vector<std::string> actions, Matrix u, Matrix v, double k)
    : states_(std::move(states)), actions_(std::move(actions)), u_(std::move(u)), v_(std::move(v)), k_(k) {
    require(states_.size() >= 2, "need at least two states");
    require(actions_.size() >= 2, "need at least two actions");
    require(u_.rows() == Eigen::Index(actions_.size()) && u_.cols() == Eigen::Index(states_.size()),
            "u must have shape |A| x |S|");
    require(v_.rows() == u_.rows() && v_.cols() == u_.cols(), "v must have shape |A| x |S|");
    require(all_finite(u_) && all_finite(v_), "payoffs must be finite");
    require(std::isfinite(k_) && k_ > 0.0, "k must be positive");
}

StageGame StageGame::with_k(double k) const { return StageGame(states_, actions_, u_, v_, k); }

StageGame StageGame::with_payoffs(Matrix u, Matrix v) const {
    return StageGame(states_, actions_, std::move(u), std::move(v), k_);
}

MarkovChain::MarkovChain(Matrix rows) : rows_(std::move(rows)) {
    require(rows_.rows() == rows_.cols() && rows_.rows() >= 1, "transition must be square");
    require(rows_.allFinite() && rows_.minCoeff() >= 0.0, "transition entries must be nonnegative");
    for (Eigen::Index i = 0; i < rows_.rows(); ++i)
        require(std::abs(rows_.row(i).sum() - 1.0) <= 1e-12, "transition rows must sum to one");
}

MarkovChain MarkovChain::iid(const Belief& mu) {
    const auto n = Eigen::Index(mu.size());
    Matrix rows(n, n);
    for (Eigen::Index i = 0; i < n; ++i) rows.row(i) = mu.probabilities().transpose();
    return MarkovChain(std::move(rows));
}

Belief MarkovChain::step(const Belief& mu) const {
    require(mu.size() == size(), "belief dimension mismatch");
    Vector next = rows_.transpose() * mu.probabilities();
    return Belief::normalized(std::move(next), 1e-9);
}

bool MarkovChain::is_iid() const {
    for (Eigen::Index i = 1; i < rows_.rows(); ++i)
        if ((rows_.row(i) - rows_.row(0)).cwiseAbs().maxCoeff() > 1e-15) return false;
    return true;
}

DiscountedGame::DiscountedGame(StageGame stage, MarkovChain chain, Belief prior, double discount, double promise_bound)
    : stage_(std::move(stage)), chain_(std::move(chain)), prior_(std::move(prior)), discount_(discount) {
    require(chain_.size() == stage_.num_states(), "transition size must match states");
    require(prior_.size() == stage_.num_states(), "prior size must match states");
    require(discount_ >= 0.0 && discount_ < 1.0, "discount must lie in [0, 1)");
    promise_bound_ = promise_bound > 0.0 ? promise_bound : default_promise_bound(stage_, discount_);
    require(promise_bound_ > stage_.u_sup_norm() / (1.0 - discount_),
            "promise bound must exceed |u|_inf / (1 - delta)");
}

double DiscountedGame::default_promise_bound(const StageGame& stage, double discount) {
    double norm = std::max(stage.u_sup_norm(), 1e-3);
    return 10.0 * norm / (1.0 - discount);
}

DiscountedGame DiscountedGame::with_discount(double discount) const {
    return DiscountedGame(stage_, chain_, prior_, discount, 0.0);
}

DiscountedGame DiscountedGame::with_k(double k) const {
    return DiscountedGame(stage_.with_k(k), chain_, prior_, discount_, promise_bound_);
}

DiscountedGame DiscountedGame::with_stage(StageGame stage) const {
    return DiscountedGame(std::move(stage), chain_, prior_, discount_, 0.0);
}

void Experiment::validate() const {
    double total = 0.0;
    for (const auto& atom : atoms) {
        require(atom.weight >= 0.0, "experiment weights must be nonnegative");
        total += atom.weight;
    }
    require(std::abs(total - 1.0) <= 1e-10, "experiment weights must sum to one");
}

double expected_payoff(const StageGame& game, const Belief& belief, std::size_t action, Side side) {
    if (action >= game.num_actions()) throw OutOfRange("action index out of range");
    if (belief.size() != game.num_states()) throw InvalidInput("belief dimension mismatch");
    const Matrix& m = side == Side::receiver ? game.u() : game.v();
    return m.row(Eigen::Index(action)).dot(belief.probabilities());
}

Response best_response(const StageGame& game, const Belief& belief, const std::vector<double>& transfers) {
    if (transfers.size() != game.num_actions()) throw InvalidInput("one transfer per action required");
    const std::size_t n = game.num_actions();
    std::vector<double> ru(n), sv(n);
    double best = -INFINITY;
    for (std::size_t a = 0; a < n; ++a) {
        if (transfers[a] < 0.0) throw InvalidInput("transfers must be nonnegative");
        ru[a] = expected_payoff(game, belief, a, Side::receiver) + transfers[a];
        sv[a] = expected_payoff(game, belief, a, Side::sender) - game.k() * transfers[a];
        best = std::max(best, ru[a]);
    }
    Response r{n, best};
    for (std::size_t a = 0; a < n; ++a) {
        if (ru[a] < best - kTieTol) continue;
        if (r.action == n || sv[a] > sv[r.action] + kTieTol) r.action = a;
    }
    return r;
}

Response best_response(const StageGame& game, const Belief& belief) {
    return best_response(game, belief, std::vector<double>(game.num_actions(), 0.0));
}

double myopic_receiver_value(const StageGame& game, const Belief& belief) {
    return (game.u() * belief.probabilities()).maxCoeff();
}

double full_info_stage_value(const StageGame& game, const Belief& belief) {
    return game.u().colwise().maxCoeff().dot(belief.probabilities().transpose());
}

namespace {

double discounted_series(const DiscountedGame& game, const Belief& start,
                         const std::function<double(const Belief&)>& per_period) {
    const double d = game.discount();
    double range = std::max(game.stage().u_range(), std::abs(game.stage().u().maxCoeff()));
    if (range <= 0.0) range = 1.0;
    Belief mu = start;
    double weight = 1.0;  // delta^xi
    double total = 0.0;
    while (true) {
        double f = per_period(mu);
        if (d == 0.0) return f;
        Belief next = game.chain().step(mu);
        if (next.sup_distance(mu) <= 1e-15) return total + weight * f;
        total += (1.0 - d) * weight * f;
        weight *= d;
        if (weight * range < 1e-12) return total;
        mu = std::move(next);
    }
}

}  // namespace

double no_info_value(const DiscountedGame& game, const Belief& belief) {
    return discounted_series(game, belief, [&](const Belief& mu) { return myopic_receiver_value(game.stage(), mu); });
}

double full_info_value(const DiscountedGame& game, const Belief& belief) {
    return discounted_series(game, belief, [&](const Belief& mu) { return full_info_stage_value(game.stage(), mu); });
}

bool bayes_plausible(const Experiment& e, const Belief& prior) {
    e.validate();
    Vector mean = Vector::Zero(Eigen::Index(prior.size()));
    for (const auto& atom : e.atoms) {
        if (atom.belief.size() != prior.size()) throw InvalidInput("belief dimension mismatch");
        mean += atom.weight * atom.belief.probabilities();
    }
    return (mean - prior.probabilities()).cwiseAbs().maxCoeff() <= 1e-9;
}

Belief ergodic_distribution(const MarkovChain& chain) {
    const std::size_t n = chain.size();
    const Matrix& p = chain.rows();
    Matrix power = p;
    bool primitive = false;
    for (std::size_t step = 1; step <= n * n; ++step) {
        if (power.minCoeff() > 0.0) {
            primitive = true;
            break;
        }
        power = power * p;
    }
    if (!primitive) throw NotErgodic("no power of the transition matrix is strictly positive");

    Vector mu = Vector::Constant(Eigen::Index(n), 1.0 / double(n));
    for (int it = 0; it < 10'000'000; ++it) {
        Vector next = p.transpose() * mu;
        next /= next.sum();
        double diff = (next - mu).cwiseAbs().maxCoeff();
        mu = next;
        if (diff < 1e-15) break;
    }
    return Belief::normalized(mu, 1e-9);
}

}  // namespace dyncontract
