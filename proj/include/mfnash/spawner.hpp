// Evolutionary pool management: rank, retire, resample, reweigh.
//
// Each round the agents are scored by squared one-step error, ranked
// ascending (ties by index), and the K worst are retired. The prior weights
// of the retained agents are renormalized into the sparse prior, tilted by
// exp(-lambda s) into the Gibbs posterior w*, and K replacement parameter
// vectors are drawn from the mixture
//     sum_{n'} w*_{n'} Normal(theta_{n'}, sigma (1 - w*_{n'}) / (N - K) I).
//
// The feature-orthogonalization QP for a respawned encoder is
//     min_A  sum_{m,n} <Z^m A, Z^n>_F^2 + zeta1 sum_m ||Z^m A beta - y||^2
//     s.t.   ||A - I||_F = zeta2,
// with m over respawned and n over retained agents. With xi = vec(A) the
// objective is xi^T Q xi + c^T xi + const. Writing xi = xi_I + u and
// g = Q xi_I + c / 2, the stationarity condition is (Q + lambda I) u = -g and
// the global minimizer has lambda >= -lambda_min(Q).

#pragma once

#include "mfnash/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace mfnash {

/// Weights and schedules carried between spawner rounds.
struct SpawnerState {
    Vec weights;                          ///< simplex over the N agents
    Vec scores;                           ///< latest scores s^n
    std::vector<double> lambda_schedule;  ///< temperature per round (last value repeats)
    std::vector<double> sigma_schedule;   ///< dispersion per round (last value repeats)
    int retire_K{1};
    int round{0};

    static SpawnerState uniform(int N, int K, std::vector<double> lambdas, std::vector<double> sigmas) {
        SpawnerState s;
        s.weights = Vec::Constant(N, 1.0 / N);
        s.scores = Vec::Zero(N);
        s.lambda_schedule = std::move(lambdas);
        s.sigma_schedule = std::move(sigmas);
        s.retire_K = K;
        s.validate();
        return s;
    }

    [[nodiscard]] double lambda() const { return at_round(lambda_schedule); }
    [[nodiscard]] double sigma() const { return at_round(sigma_schedule); }

    void validate() const {
        const auto N = weights.size();
        if (N < 2) throw ParamError("spawner: pool must hold at least 2 agents");
        if (retire_K < 1 || retire_K >= N) throw ParamError("spawner: retire_K must satisfy 1 <= K < N");
        if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > kTolerances.simplex * N)
            throw ParamError("spawner: weights must lie on the simplex");
        if (lambda_schedule.empty() || sigma_schedule.empty())
            throw ParamError("spawner: lambda and sigma schedules must be nonempty");
        for (double l : lambda_schedule)
            if (!(l >= 0.0) || !std::isfinite(l)) throw ParamError("spawner: lambda must be finite and >= 0");
        for (double s : sigma_schedule)
            if (!(s >= 0.0) || !std::isfinite(s)) throw ParamError("spawner: sigma must be finite and >= 0");
    }

private:
    [[nodiscard]] double at_round(const std::vector<double>& sched) const {
        if (sched.empty()) throw ParamError("spawner: empty schedule");
        return sched[std::min<std::size_t>(static_cast<std::size_t>(std::max(round, 0)), sched.size() - 1)];
    }
};

/// s^n = ||y - Yhat^n||^2.
inline Vec score_agents(const Vec& target, const std::vector<Vec>& predictions) {
    Vec s(static_cast<Eigen::Index>(predictions.size()));
    for (std::size_t n = 0; n < predictions.size(); ++n) {
        if (predictions[n].size() != target.size()) throw RangeError("score_agents: prediction size mismatch");
        s(static_cast<Eigen::Index>(n)) = (target - predictions[n]).squaredNorm();
    }
    return s;
}

/// Agents ordered by ascending score with index tie-break, split into the
/// retained N-K and the retired K.
struct Ranking {
    std::vector<int> order;
    std::vector<int> retained;
    std::vector<int> retired;
};

inline Ranking rank_agents(const Vec& scores, int K) {
    const auto N = static_cast<int>(scores.size());
    if (K < 0 || K >= N) throw ParamError("rank_agents: K must satisfy 0 <= K < N");
    Ranking r;
    r.order.resize(static_cast<std::size_t>(N));
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) { return scores(a) < scores(b); });
    r.retained.assign(r.order.begin(), r.order.begin() + (N - K));
    r.retired.assign(r.order.begin() + (N - K), r.order.end());
    return r;
}

/// Prior weights of the retained agents renormalized to sum to one.
inline Vec sparse_prior(const Vec& weights, const std::vector<int>& retained) {
    Vec p(static_cast<Eigen::Index>(retained.size()));
    for (std::size_t i = 0; i < retained.size(); ++i) p(static_cast<Eigen::Index>(i)) = weights(retained[i]);
    const double total = p.sum();
    if (!(total > 0.0)) throw DegenerateError("sparse_prior: retained agents carry zero prior mass");
    return p / total;
}

/// w*_i proportional to exp(-lambda s_i) prior_i, computed in log space.
inline Vec gibbs_reweigh(const Vec& prior, const Vec& scores, double lambda) {
    if (prior.size() != scores.size()) throw RangeError("gibbs_reweigh: prior and scores differ in length");
    if (prior.size() == 0) throw DegenerateError("gibbs_reweigh: empty retained set");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParamError("gibbs_reweigh: lambda must be finite and >= 0");
    if ((prior.array() < 0.0).any() || !(prior.sum() > 0.0))
        throw DegenerateError("gibbs_reweigh: prior has no mass on the retained set");
    Vec logw(prior.size());
    for (Eigen::Index i = 0; i < prior.size(); ++i)
        logw(i) = prior(i) > 0.0 ? std::log(prior(i)) - lambda * scores(i) : -std::numeric_limits<double>::infinity();
    const double top = logw.maxCoeff();
    Vec w = (logw.array() - top).exp().matrix();
    return w / w.sum();
}

/// Variational objective sum_i w_i s_i + (1/lambda) sum_i w_i log(w_i / prior_i).
inline double gibbs_objective(const Vec& w, const Vec& prior, const Vec& scores, double lambda) {
    double obj = w.dot(scores);
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) > 0.0) obj += w(i) * std::log(w(i) / prior(i)) / lambda;
    return obj;
}

/// Outcome of one rank-retire-resample-reweigh round.
struct SpawnResult {
    std::vector<Vec> params;   ///< full pool after replacement
    Ranking ranking;
    Vec posterior;             ///< Gibbs posterior over ranking.retained
    std::vector<int> parents;  ///< parent agent of each retired slot, aligned with ranking.retired
    Vec next_weights;          ///< weights carried into the next round
};

/// Retires the K worst agents by state.scores and refills their slots from
/// the posterior mixture. Retained parameter vectors are not modified.
/// Next-round weights put (N-K)/N w* on the retained agents and 1/N on each
/// replacement. Advances state.round.
inline SpawnResult retire_and_resample(const std::vector<Vec>& params, SpawnerState& state, std::mt19937_64& rng) {
    state.validate();
    const auto N = static_cast<int>(params.size());
    if (N != state.weights.size()) throw RangeError("retire_and_resample: pool size differs from weight vector");
    if (state.scores.size() != N) throw RangeError("retire_and_resample: scores must cover every agent");
    const int K = state.retire_K;

    SpawnResult out;
    out.params = params;
    out.ranking = rank_agents(state.scores, K);
    const auto& kept = out.ranking.retained;
    const Vec prior = sparse_prior(state.weights, kept);
    Vec kept_scores(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) kept_scores(static_cast<Eigen::Index>(i)) = state.scores(kept[i]);
    out.posterior = gibbs_reweigh(prior, kept_scores, state.lambda());

    const double sigma = state.sigma();
    std::discrete_distribution<int> pick(out.posterior.data(), out.posterior.data() + out.posterior.size());
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int slot : out.ranking.retired) {
        const int j = pick(rng);
        const int parent = kept[static_cast<std::size_t>(j)];
        const double var = sigma * (1.0 - out.posterior(j)) / static_cast<double>(N - K);
        const double sd = std::sqrt(std::max(var, 0.0));
        Vec draw = params[static_cast<std::size_t>(parent)];
        for (Eigen::Index i = 0; i < draw.size(); ++i) draw(i) += sd * nd(rng);
        out.params[static_cast<std::size_t>(slot)] = std::move(draw);
        out.parents.push_back(parent);
    }

    out.next_weights = Vec::Constant(N, 1.0 / N);
    for (std::size_t i = 0; i < kept.size(); ++i)
        out.next_weights(kept[i]) = out.posterior(static_cast<Eigen::Index>(i)) * (N - K) / static_cast<double>(N);
    out.next_weights /= out.next_weights.sum();
    state.weights = out.next_weights;
    ++state.round;
    return out;
}

/// Quadratic data of the orthogonalization problem.
struct OrthoProblem {
    int dim_z{0};
    Mat Q;            ///< d_z^2 x d_z^2, symmetric PSD
    Vec c;            ///< d_z^2
    Vec xi_I;         ///< vec(I)
    double constant{0.0};  ///< zeta1 K ||y||^2
    double zeta1{0.0};
    double zeta2{0.0};
    std::vector<Vec> v;  ///< v_{m,n} = vec((Z^m)^T Z^n), m-major
    std::vector<Mat> H;  ///< H_m = beta^T kron Z^m

    /// xi^T Q xi + c^T xi + constant.
    [[nodiscard]] double objective(const Vec& xi) const { return xi.dot(Q * xi) + c.dot(xi) + constant; }
    [[nodiscard]] double objective(const Mat& A) const { return objective(Vec(A.reshaped())); }
};

/// H = beta^T kron Z, so that Z A beta = H vec(A).
inline Mat kron_row(const Vec& beta, const Mat& Z) {
    const auto dz = beta.size();
    Mat H(Z.rows(), dz * Z.cols());
    for (Eigen::Index j = 0; j < dz; ++j) H.middleCols(j * Z.cols(), Z.cols()) = beta(j) * Z;
    return H;
}

inline OrthoProblem build_ortho_problem(const std::vector<Mat>& retained_Z, const std::vector<Mat>& respawned_Z,
                                        const Vec& beta, const Vec& y, double zeta1, double zeta2 = 0.0) {
    if (!(zeta1 >= 0.0) || !(zeta2 >= 0.0)) throw ParamError("ortho: zeta1 and zeta2 must be nonnegative");
    if (respawned_Z.empty()) throw RangeError("ortho: no respawned latents");
    const auto dy = respawned_Z.front().rows();
    const auto dz = respawned_Z.front().cols();
    if (beta.size() != dz) throw RangeError("ortho: beta must have d_z entries");
    if (y.size() != dy) throw RangeError("ortho: y must have d_y entries");
    for (const auto* group : {&retained_Z, &respawned_Z})
        for (const auto& Z : *group)
            if (Z.rows() != dy || Z.cols() != dz) throw RangeError("ortho: latent shapes disagree");

    OrthoProblem p;
    p.dim_z = static_cast<int>(dz);
    p.zeta1 = zeta1;
    p.zeta2 = zeta2;
    const auto d2 = dz * dz;
    p.Q = Mat::Zero(d2, d2);
    p.c = Vec::Zero(d2);
    p.xi_I = Vec(Mat::Identity(dz, dz).reshaped());
    for (const auto& Zm : respawned_Z) {
        for (const auto& Zn : retained_Z) {
            Vec vmn = Vec((Zm.transpose() * Zn).reshaped());
            p.Q.noalias() += vmn * vmn.transpose();
            p.v.push_back(std::move(vmn));
        }
        Mat Hm = kron_row(beta, Zm);
        p.Q.noalias() += zeta1 * Hm.transpose() * Hm;
        p.c.noalias() -= 2.0 * zeta1 * Hm.transpose() * y;
        p.H.push_back(std::move(Hm));
    }
    p.Q = 0.5 * (p.Q + p.Q.transpose());
    p.constant = zeta1 * static_cast<double>(respawned_Z.size()) * y.squaredNorm();
    return p;
}

struct OrthoSolution {
    Mat A_star;
    double lambda_star{0.0};  ///< +inf when zeta2 = 0 (A* = I)
    double lambda_min{0.0};   ///< smallest eigenvalue of Q
    bool hard_case{false};
    double kkt_residual{0.0};         ///< ||(Q + lambda* I) xi* - lambda* xi_I + c/2||
    double constraint_residual{0.0};  ///< | ||xi* - xi_I|| - zeta2 |
    double objective{0.0};
    int iterations{0};
};

/// g = Q xi_I + c / 2.
inline Vec ortho_gradient(const OrthoProblem& p) { return p.Q * p.xi_I + 0.5 * p.c; }

/// A_lambda = unvec((Q + lambda I)^+ (lambda xi_I - c/2)).
inline Mat ortho_A_lambda(const OrthoProblem& p, double lambda) {
    const auto d2 = p.Q.rows();
    const Mat shifted = p.Q + lambda * Mat::Identity(d2, d2);
    const Vec rhs = lambda * p.xi_I - 0.5 * p.c;
    const Vec xi = shifted.completeOrthogonalDecomposition().solve(rhs);
    return xi.reshaped(p.dim_z, p.dim_z);
}

/// Global minimizer of the sphere-constrained QP via the secular equation.
inline OrthoSolution ortho_solve(const OrthoProblem& p) {
    const auto d2 = p.Q.rows();
    const int dz = p.dim_z;
    OrthoSolution sol;
    if (!(p.zeta2 >= 0.0)) throw ParamError("ortho_solve: zeta2 must be nonnegative");
    const Eigen::SelfAdjointEigenSolver<Mat> eig(p.Q);
    if (eig.info() != Eigen::Success) throw SolveError("ortho_solve: eigendecomposition failed");
    const Vec& q = eig.eigenvalues();
    const Mat& V = eig.eigenvectors();
    sol.lambda_min = q(0);

    if (p.zeta2 == 0.0) {
        sol.A_star = Mat::Identity(dz, dz);
        sol.lambda_star = std::numeric_limits<double>::infinity();
        sol.objective = p.objective(sol.A_star);
        return sol;
    }

    const Vec g = ortho_gradient(p);
    const Vec gh = V.transpose() * g;
    const double qmin = q(0);
    const double scale = std::max({1.0, q.cwiseAbs().maxCoeff(), g.norm()});
    const double eig_tol = 1e-12 * scale;

    auto u_norm = [&](double lam) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < d2; ++i) s += gh(i) * gh(i) / ((q(i) + lam) * (q(i) + lam));
        return std::sqrt(s);
    };
    auto u_at = [&](double lam) {
        Vec uh(d2);
        for (Eigen::Index i = 0; i < d2; ++i) uh(i) = -gh(i) / (q(i) + lam);
        return Vec(V * uh);
    };

    // Components of g in the bottom eigenspace decide whether the hard case can occur.
    double active_mass = 0.0;
    Eigen::Index n_active = 0;
    while (n_active < d2 && q(n_active) - qmin <= eig_tol) {
        active_mass += gh(n_active) * gh(n_active);
        ++n_active;
    }
    const bool g_orthogonal = std::sqrt(active_mass) <= 1e-12 * std::max(1.0, g.norm());

    Vec u;
    if (g_orthogonal) {
        Vec uh = Vec::Zero(d2);
        for (Eigen::Index i = n_active; i < d2; ++i) uh(i) = -gh(i) / (q(i) - qmin);
        const double rest = uh.norm();
        if (rest <= p.zeta2) {
            Vec vmin = V.col(0);
            for (Eigen::Index i = 0; i < d2; ++i) {
                if (std::abs(vmin(i)) > 1e-12) {
                    if (vmin(i) < 0.0) vmin = -vmin;
                    break;
                }
            }
            const double tau = std::sqrt(std::max(p.zeta2 * p.zeta2 - rest * rest, 0.0));
            u = V * uh + tau * vmin;
            sol.lambda_star = -qmin;
            sol.hard_case = true;
        }
    }

    if (!sol.hard_case) {
        // phi(lam) = 1/||u(lam)|| - 1/zeta2 is increasing on (-qmin, inf); Newton with a bisection guard.
        double lo = -qmin;
        double hi = -qmin + std::max(g.norm() / p.zeta2, eig_tol);
        double lam = hi;
        for (int it = 0; it < 500; ++it) {
            sol.iterations = it + 1;
            const double nrm = u_norm(lam);
            const double phi = 1.0 / nrm - 1.0 / p.zeta2;
            if (phi < 0.0) lo = lam; else hi = lam;
            if (std::abs(nrm - p.zeta2) <= 1e-15 * p.zeta2 || hi - lo <= 1e-16 * std::max(1.0, std::abs(lam))) break;
            double dnrm = 0.0;
            for (Eigen::Index i = 0; i < d2; ++i) dnrm -= gh(i) * gh(i) / std::pow(q(i) + lam, 3);
            dnrm /= nrm;
            const double dphi = -dnrm / (nrm * nrm);
            double next = lam - phi / dphi;
            if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
            lam = next;
        }
        sol.lambda_star = lam;
        u = u_at(lam);
    }

    const Vec xi = p.xi_I + u;
    sol.A_star = xi.reshaped(dz, dz);
    sol.kkt_residual = ((p.Q + sol.lambda_star * Mat::Identity(d2, d2)) * xi - sol.lambda_star * p.xi_I + 0.5 * p.c).norm();
    sol.constraint_residual = std::abs(u.norm() - p.zeta2);
    sol.objective = p.objective(xi);
    return sol;
}

/// Both sides of ||A* - A_lambda|| <= |lambda - lambda*| ||g|| / ((lambda + lmin)(lambda* + lmin)).
struct LambdaBound {
    double distance{0.0};
    double bound{0.0};
};

inline LambdaBound lambda_bound(const OrthoProblem& p, const OrthoSolution& sol, double lambda) {
    if (sol.hard_case || !std::isfinite(sol.lambda_star))
        throw DegenerateError("lambda_bound: requires lambda* + lambda_min(Q) != 0");
    if (!(lambda > -sol.lambda_min)) throw RangeError("lambda_bound: lambda must exceed -lambda_min(Q)");
    LambdaBound b;
    b.distance = (sol.A_star - ortho_A_lambda(p, lambda)).norm();
    b.bound = std::abs(lambda - sol.lambda_star) * ortho_gradient(p).norm() /
              ((lambda + sol.lambda_min) * (sol.lambda_star + sol.lambda_min));
    return b;
}

/// ||(Q + l1 I)^{-1} - (Q + l2 I)^{-1} - (l2 - l1)(Q + l2 I)^{-1}(Q + l1 I)^{-1}||_F.
inline double resolvent_check(const Mat& Q, double lambda1, double lambda2) {
    const auto d = Q.rows();
    const Mat I = Mat::Identity(d, d);
    const Eigen::PartialPivLU<Mat> lu1(Q + lambda1 * I);
    const Eigen::PartialPivLU<Mat> lu2(Q + lambda2 * I);
    if (!(lu1.rcond() > 1e-14) || !(lu2.rcond() > 1e-14)) throw SolveError("resolvent_check: singular shift");
    const Mat R1 = lu1.inverse();
    const Mat R2 = lu2.inverse();
    return (R1 - R2 - (lambda2 - lambda1) * R2 * R1).norm();
}

}  // namespace mfnash
