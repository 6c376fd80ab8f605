#pragma once

// Shared fixtures and brute-force oracles. Nothing here calls the solvers.

#include "dyncontract/dynamic_solver.hpp"
#include "dyncontract/game.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace support {

using dyncontract::Belief;
using dyncontract::DiscountedGame;
using dyncontract::MarkovChain;
using dyncontract::Matrix;
using dyncontract::StageGame;
using dyncontract::Vector;

inline std::vector<std::string> names(const char* prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

inline StageGame appendix_d(double k = 1.0) {
    Matrix u(3, 2), v(3, 2);
    u << 1, -2, -2, 1, 0, 0;
    v << 0, 0, 2.5, 2.5, -0.5, -0.5;
    return StageGame(names("theta", 2), names("a", 3), u, v, k);
}

inline Belief appendix_d_prior() { return Belief(std::vector<double>{5.0 / 6.0, 1.0 / 6.0}); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Belief random_interior_belief(std::mt19937_64& rng, std::size_t n) {
    Vector p(static_cast<Eigen::Index>(n));
    for (auto& e : p) e = 0.05 + uniform(rng, 0.0, 1.0);
    return Belief::normalized(p / p.sum());
}

inline StageGame random_stage(std::mt19937_64& rng, std::size_t ns, std::size_t na, double k, double range = 2.0) {
    Matrix u(static_cast<Eigen::Index>(na), static_cast<Eigen::Index>(ns));
    Matrix v(static_cast<Eigen::Index>(na), static_cast<Eigen::Index>(ns));
    for (Eigen::Index a = 0; a < u.rows(); ++a)
        for (Eigen::Index s = 0; s < u.cols(); ++s) {
            u(a, s) = uniform(rng, -range, range);
            v(a, s) = uniform(rng, -range, range);
        }
    return StageGame(names("s", ns), names("a", na), u, v, k);
}

/// Shifts u so that the best uninformed Receiver payoff at `mu` is zero.
inline StageGame normalize_at(const StageGame& g, const Belief& mu) {
    double best = -INFINITY;
    for (std::size_t a = 0; a < g.num_actions(); ++a) {
        double e = 0.0;
        for (std::size_t s = 0; s < g.num_states(); ++s) e += mu[s] * g.u(a, s);
        best = std::max(best, e);
    }
    Matrix u = g.u().array() - best;
    return g.with_payoffs(u, g.v());
}

/// Binary-state i.i.d. game with |A| in {2, 3}, normalized at the prior.
inline DiscountedGame random_iid_game(std::mt19937_64& rng, double delta) {
    const std::size_t na = 2 + std::size_t(rng() % 2);
    const std::array<double, 3> ks{0.3, 1.0, 3.0};
    const double k = ks[rng() % 3];
    const Belief prior = Belief::binary(uniform(rng, 0.15, 0.85));
    const StageGame g = normalize_at(random_stage(rng, 2, na, k), prior);
    return DiscountedGame(g, MarkovChain::iid(prior), prior, delta);
}

// ---------------------------------------------------------------- oracles

/// Transfer-augmented stage value computed from the definition.
inline double vt_direct(const StageGame& g, const std::vector<double>& mu) {
    const std::size_t na = g.num_actions(), ns = g.num_states();
    std::vector<double> eu(na, 0.0), ev(na, 0.0);
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t s = 0; s < ns; ++s) {
            eu[a] += mu[s] * g.u(a, s);
            ev[a] += mu[s] * g.v(a, s);
        }
    const double ustar = *std::max_element(eu.begin(), eu.end());
    double best = -INFINITY;
    for (std::size_t a = 0; a < na; ++a) best = std::max(best, ev[a] - g.k() * (ustar - eu[a]));
    return best;
}

/// Concavification at p1 of f sampled on a uniform mesh of [0, 1], by
/// checking every chord straddling the prior.
inline double cav_mesh_2(const std::vector<double>& f, double p1) {
    const std::size_t m = f.size() - 1;
    double best = -INFINITY;
    for (std::size_t i = 0; i <= m; ++i) {
        const double xi = double(i) / double(m);
        if (xi > p1 + 1e-15) break;
        for (std::size_t j = m + 1; j-- > 0;) {
            const double xj = double(j) / double(m);
            if (xj < p1 - 1e-15) break;
            const double val = xj - xi < 1e-15 ? f[i] : f[i] + (p1 - xi) / (xj - xi) * (f[j] - f[i]);
            best = std::max(best, val);
        }
    }
    return best;
}

/// Smallest lambda . mu over lambda with lambda . x_i >= f_i for the given
/// constraints; exhaustive over triples of tight constraints.
inline bool solve_dual_3(const std::vector<std::array<double, 3>>& xs, const std::vector<double>& fs,
                         const std::array<double, 3>& mu, std::array<double, 3>& best) {
    double best_obj = INFINITY;
    const std::size_t m = xs.size();
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b)
            for (std::size_t c = b + 1; c < m; ++c) {
                Eigen::Matrix3d A;
                Eigen::Vector3d r;
                const std::array<std::size_t, 3> idx{a, b, c};
                for (int i = 0; i < 3; ++i) {
                    for (int j = 0; j < 3; ++j) A(i, j) = xs[idx[std::size_t(i)]][std::size_t(j)];
                    r[i] = fs[idx[std::size_t(i)]];
                }
                if (std::abs(A.determinant()) < 1e-14) continue;
                const Eigen::Vector3d lam = A.partialPivLu().solve(r);
                bool feasible = true;
                for (std::size_t i = 0; i < m && feasible; ++i)
                    feasible = lam[0] * xs[i][0] + lam[1] * xs[i][1] + lam[2] * xs[i][2] >= fs[i] - 1e-10;
                if (!feasible) continue;
                const double obj = lam[0] * mu[0] + lam[1] * mu[1] + lam[2] * mu[2];
                if (obj < best_obj) {
                    best_obj = obj;
                    best = {lam[0], lam[1], lam[2]};
                }
            }
    return std::isfinite(best_obj);
}

/// Concavification at mu of g's transfer-augmented value sampled on the mesh
/// {z / N}, via cutting planes on supporting hyperplanes.
inline double cav_mesh_3(const StageGame& g, std::size_t N, const std::array<double, 3>& mu) {
    std::vector<std::array<double, 3>> pts;
    std::vector<double> vals;
    for (std::size_t i = 0; i <= N; ++i)
        for (std::size_t j = 0; i + j <= N; ++j) {
            const std::array<double, 3> x{double(i) / double(N), double(j) / double(N), double(N - i - j) / double(N)};
            pts.push_back(x);
            vals.push_back(vt_direct(g, {x[0], x[1], x[2]}));
        }
    std::vector<std::array<double, 3>> xs;
    std::vector<double> fs;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (std::max({pts[i][0], pts[i][1], pts[i][2]}) == 1.0) {
            xs.push_back(pts[i]);
            fs.push_back(vals[i]);
        }
    std::array<double, 3> lam{};
    for (int iter = 0; iter < 500; ++iter) {
        if (!solve_dual_3(xs, fs, mu, lam)) return NAN;
        double worst = 1e-12;
        std::size_t arg = pts.size();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double gap = vals[i] - (lam[0] * pts[i][0] + lam[1] * pts[i][1] + lam[2] * pts[i][2]);
            if (gap > worst) {
                worst = gap;
                arg = i;
            }
        }
        if (arg == pts.size()) break;
        xs.push_back(pts[arg]);
        fs.push_back(vals[arg]);
    }
    return lam[0] * mu[0] + lam[1] * mu[1] + lam[2] * mu[2];
}

/// Discounted Receiver value of the uninformed myopic best reply along the
/// prior path, summed term by term.
inline double no_info_series(const DiscountedGame& game, std::size_t periods = 20000) {
    Belief mu = game.prior();
    double total = 0.0, w = 1.0 - game.discount();
    for (std::size_t t = 0; t < periods && w > 1e-18; ++t) {
        double best = -INFINITY;
        for (std::size_t a = 0; a < game.stage().num_actions(); ++a) {
            double e = 0.0;
            for (std::size_t s = 0; s < mu.size(); ++s) e += mu[s] * game.stage().u(a, s);
            best = std::max(best, e);
        }
        total += w * best;
        w *= game.discount();
        Vector next = game.chain().rows().transpose() * mu.probabilities();
        mu = Belief::normalized(next);
    }
    return total;
}

}  // namespace support
