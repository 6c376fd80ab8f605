#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyncontract {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NotErgodic : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct DegenerateDenominator : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct InconsistentMarginals : Error { using Error::Error; };
struct UnreachablePoint : Error { using Error::Error; };
struct TooLarge : Error { using Error::Error; };
struct InvalidInput : Error { using Error::Error; };

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Side { receiver, sender };

/// Probability vector over states.
class Belief {
public:
    Belief() = default;
    explicit Belief(Vector p);
    explicit Belief(const std::vector<double>& p) : Belief(Vector(Eigen::Map<const Vector>(p.data(), Eigen::Index(p.size())))) {}

    /// Clamps tiny negatives and rescales; accepts sums within `tol` of 1.
    static Belief normalized(Vector p, double tol = 1e-9);
    static Belief degenerate(std::size_t n, std::size_t state);
    static Belief uniform(std::size_t n);
    /// Two-state belief with P(state 1) = p1.
    static Belief binary(double p1);

    const Vector& probabilities() const { return p_; }
    std::size_t size() const { return std::size_t(p_.size()); }
    double operator[](std::size_t i) const { return p_[Eigen::Index(i)]; }

    bool is_degenerate(double tol = 1e-12) const;
    bool is_interior(double tol = 1e-12) const;
    double sup_distance(const Belief& other) const;
    bool near(const Belief& other, double tol = 1e-9) const { return sup_distance(other) <= tol; }
    std::vector<double> to_vector() const { return {p_.data(), p_.data() + p_.size()}; }

private:
    Vector p_;
};

class StageGame {
public:
    StageGame(std::vector<std::string> states, std::vector<std::string> actions, Matrix u, Matrix v, double k);

    std::size_t num_states() const { return states_.size(); }
    std::size_t num_actions() const { return actions_.size(); }
    const std::vector<std::string>& states() const { return states_; }
    const std::vector<std::string>& actions() const { return actions_; }
    /// Payoff matrices indexed (action, state).
    const Matrix& u() const { return u_; }
    const Matrix& v() const { return v_; }
    double k() const { return k_; }

    double u(std::size_t a, std::size_t s) const { return u_(Eigen::Index(a), Eigen::Index(s)); }
    double v(std::size_t a, std::size_t s) const { return v_(Eigen::Index(a), Eigen::Index(s)); }

    double u_sup_norm() const { return u_.cwiseAbs().maxCoeff(); }
    double u_range() const { return u_.maxCoeff() - u_.minCoeff(); }
    double v_range() const { return v_.maxCoeff() - v_.minCoeff(); }

    StageGame with_k(double k) const;
    StageGame with_payoffs(Matrix u, Matrix v) const;

private:
    std::vector<std::string> states_;
    std::vector<std::string> actions_;
    Matrix u_;
    Matrix v_;
    double k_;
};

class MarkovChain {
public:
    explicit MarkovChain(Matrix rows);
    static MarkovChain iid(const Belief& mu);

    const Matrix& rows() const { return rows_; }
    std::size_t size() const { return std::size_t(rows_.rows()); }
    /// Tomorrow's prior given today's posterior.
    Belief step(const Belief& mu) const;
    bool is_iid() const;

private:
    Matrix rows_;
};

class DiscountedGame {
public:
    /// A non-positive promise bound selects the default 10 * |u|_inf / (1 - delta).
    DiscountedGame(StageGame stage, MarkovChain chain, Belief prior, double discount, double promise_bound = 0.0);

    const StageGame& stage() const { return stage_; }
    const MarkovChain& chain() const { return chain_; }
    const Belief& prior() const { return prior_; }
    double discount() const { return discount_; }
    double promise_bound() const { return promise_bound_; }
    double k() const { return stage_.k(); }

    static double default_promise_bound(const StageGame& stage, double discount);

    DiscountedGame with_discount(double discount) const;
    DiscountedGame with_k(double k) const;
    DiscountedGame with_stage(StageGame stage) const;

private:
    StageGame stage_;
    MarkovChain chain_;
    Belief prior_;
    double discount_;
    double promise_bound_;
};

struct ExperimentAtom {
    Belief belief;
    double weight = 0.0;
};

struct Experiment {
    std::vector<ExperimentAtom> atoms;
    void validate() const;
};

struct ContractAtom {
    Belief belief;
    std::size_t action = 0;
    double transfer = 0.0;
    double promise = 0.0;
    double weight = 0.0;
};

struct Response {
    std::size_t action = 0;
    double receiver_value = 0.0;
};

double expected_payoff(const StageGame& game, const Belief& belief, std::size_t action, Side side);

/// Receiver's choice given per-action transfers; ties go to the Sender.
Response best_response(const StageGame& game, const Belief& belief, const std::vector<double>& transfers);
Response best_response(const StageGame& game, const Belief& belief);

/// max_a E_mu[u(a, theta)].
double myopic_receiver_value(const StageGame& game, const Belief& belief);
/// E_mu[max_a u(a, theta)].
double full_info_stage_value(const StageGame& game, const Belief& belief);

double no_info_value(const DiscountedGame& game, const Belief& belief);
double full_info_value(const DiscountedGame& game, const Belief& belief);

bool bayes_plausible(const Experiment& e, const Belief& prior);

Belief ergodic_distribution(const MarkovChain& chain);

/// Receiver tie tolerance used by every argmax over actions.
inline constexpr double kTieTol = 1e-9;

}  // namespace dyncontract
