// Shared fixtures and independent oracles for the test suites.

#pragma once

#include "mfnash/mfnash.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace mfnash::fx {

/// Scalar game with a constant deterministic latent and the given targets.
inline GameParams scalar_game(int N, int T, double theta, double theta_bar, double kappa, double kappa_bar,
                              double gamma, double alpha) {
    GameParams p = GameParams::scalar(1, 1, theta, theta_bar);
    p.population_N = N;
    p.horizon_T = T;
    p.kappa = kappa;
    p.kappa_bar = kappa_bar;
    p.gamma = gamma;
    p.alpha = alpha;
    return p;
}

inline TargetSeries scalar_targets(std::vector<double> values) {
    TargetSeries s;
    for (double v : values) s.values.push_back(Vec::Constant(1, v));
    return s;
}

inline TargetSeries random_targets(int dim, int count, std::mt19937_64& rng) {
    TargetSeries s;
    for (int i = 0; i < count; ++i) s.values.push_back(gaussian_matrix(dim, 1, rng));
    return s;
}

/// Homogeneous game with random coefficients and a random deterministic latent schedule.
struct RandomGame {
    GameParams params;
    std::vector<Mat> schedule;
    MomentSet moments;
    TargetSeries targets;
};

inline RandomGame random_game(int N, int d, int T, std::uint64_t seed) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(d * 100 + T), Stream::Initial);
    std::uniform_real_distribution<double> unif(0.2, 0.9);
    RandomGame g;
    g.params = GameParams::scalar(d, d, 0.0, 0.0);
    g.params.theta = 0.5 * gaussian_matrix(d, d, rng) / std::sqrt(static_cast<double>(d));
    g.params.theta_bar = 0.3 * gaussian_matrix(d, d, rng) / std::sqrt(static_cast<double>(d));
    g.params.kappa = 1.0;
    g.params.kappa_bar = unif(rng);
    g.params.gamma = unif(rng);
    g.params.alpha = 0.2 * unif(rng);
    g.params.horizon_T = T;
    g.params.population_N = N;
    for (int t = 0; t < T; ++t) g.schedule.push_back(gaussian_matrix(d, d, rng));
    g.moments = exact_moments_deterministic(g.schedule);
    g.targets = random_targets(d, T + 1, rng);
    return g;
}

/// Affine feedback law beta_t = K_t Y_t + k_t acting on the stacked state.
struct AffineLaw {
    std::vector<Mat> K;
    std::vector<Vec> k;
};

/// Single-agent LQ tracker for agent n against fixed affine laws of the other
/// agents, solved by a plain backward Riccati sweep on the stacked state.
inline AffineLaw lq_best_response(const GameParams& p, const std::vector<Mat>& schedule, const TargetSeries& y,
                                  int n, const std::vector<AffineLaw>& laws) {
    const int N = p.population_N, dy = p.dim_y, dz = p.dim_z, T = p.horizon_T;
    const int ny = N * dy;
    const Mat ones = Mat::Constant(N, N, 1.0 / N);
    Mat A = Mat::Zero(ny, ny);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            A.block(i * dy, j * dy, dy, dy) = (i == j ? p.theta : Mat::Zero(dy, dy)) + ones(i, j) * p.theta_bar;
    // Selector of agent n and of the deviation from the population mean.
    Mat En = Mat::Zero(dy, ny);
    En.block(0, n * dy, dy, dy).setIdentity();
    Mat Dn = En;
    for (int j = 0; j < N; ++j) Dn.block(0, j * dy, dy, dy) -= Mat::Identity(dy, dy) / N;

    AffineLaw out;
    out.K.assign(static_cast<std::size_t>(T), Mat::Zero(dz, ny));
    out.k.assign(static_cast<std::size_t>(T), Vec::Zero(dz));
    Mat P = Mat::Zero(ny, ny);
    Vec s = Vec::Zero(ny);
    for (int t = T - 1; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        const Mat& Z = schedule[ti];
        Mat Abar = A;
        Vec abar = Vec::Zero(ny);
        for (int j = 0; j < N; ++j) {
            if (j == n) continue;
            Mat Bj = Mat::Zero(ny, dz);
            Bj.block(j * dy, 0, dy, dz) = Z;
            Abar += Bj * laws[static_cast<std::size_t>(j)].K[ti];
            abar += Bj * laws[static_cast<std::size_t>(j)].k[ti];
        }
        Mat B = Mat::Zero(ny, dz);
        B.block(n * dy, 0, dy, dz) = Z;
        const double delta = p.discount(t);
        const Mat W = delta * (p.kappa * En.transpose() * En + p.kappa_bar * Dn.transpose() * Dn) + P;
        const Vec w = delta * p.kappa * En.transpose() * y.values[ti + 1] + s;
        const Mat R = B.transpose() * W * B + delta * p.gamma * Mat::Identity(dz, dz);
        const Mat K = -R.ldlt().solve(B.transpose() * W * Abar);
        const Vec k = R.ldlt().solve(B.transpose() * (w - W * abar));
        const Mat Ac = Abar + B * K;
        const Vec ac = abar + B * k;
        P = Ac.transpose() * W * Ac + delta * p.gamma * K.transpose() * K;
        P = 0.5 * (P + P.transpose());
        s = Ac.transpose() * (w - W * ac) - delta * p.gamma * K.transpose() * k;
        out.K[ti] = K;
        out.k[ti] = k;
    }
    return out;
}

/// Fixed point of Gauss-Seidel best responses, starting from zero laws.
inline std::vector<AffineLaw> best_response_fixed_point(const GameParams& p, const std::vector<Mat>& schedule,
                                                        const TargetSeries& y, int sweeps, double* change = nullptr) {
    const int N = p.population_N;
    std::vector<AffineLaw> laws(static_cast<std::size_t>(N));
    for (auto& l : laws) {
        l.K.assign(static_cast<std::size_t>(p.horizon_T), Mat::Zero(p.dim_z, N * p.dim_y));
        l.k.assign(static_cast<std::size_t>(p.horizon_T), Vec::Zero(p.dim_z));
    }
    double last = 0.0;
    for (int it = 0; it < sweeps; ++it) {
        last = 0.0;
        for (int n = 0; n < N; ++n) {
            AffineLaw next = lq_best_response(p, schedule, y, n, laws);
            for (int t = 0; t < p.horizon_T; ++t) {
                const auto ti = static_cast<std::size_t>(t);
                last = std::max(last, max_abs(next.K[ti] - laws[static_cast<std::size_t>(n)].K[ti]));
                last = std::max(last, max_abs(Vec(next.k[ti] - laws[static_cast<std::size_t>(n)].k[ti])));
            }
            laws[static_cast<std::size_t>(n)] = std::move(next);
        }
    }
    if (change) *change = last;
    return laws;
}

/// Deterministic-latent scenario over the given targets.
inline Scenario deterministic_scenario(const GameParams& p, const TargetSeries& targets, std::vector<Mat> schedule) {
    Scenario sc;
    sc.params = p;
    sc.targets = targets;
    sc.latent.kind = LatentKind::Deterministic;
    sc.latent.schedule = std::move(schedule);
    sc.mode = Mode::Game;
    sc.steps = p.horizon_T;
    return sc;
}

/// Minimizer of the Gibbs variational objective over the simplex by projected
/// gradient descent in the metric diag(lambda w), which keeps iterates interior
/// where the entropy term has curvature 1 / (lambda w). Step length by a ratio
/// test and Armijo backtracking.
inline Vec gibbs_by_projected_gradient(const Vec& prior, const Vec& scores, double lambda, int max_iter = 1000) {
    auto objective = [&](const Vec& w) {
        double f = w.dot(scores);
        for (Eigen::Index i = 0; i < w.size(); ++i)
            if (w(i) > 0.0) f += w(i) * std::log(w(i) / prior(i)) / lambda;
        return f;
    };
    Vec w = prior;
    for (int it = 0; it < max_iter; ++it) {
        Vec g = scores;
        for (Eigen::Index i = 0; i < w.size(); ++i) g(i) += (std::log(w(i) / prior(i)) + 1.0) / lambda;
        // Projection of the scaled gradient onto the tangent space sum_i d_i = 0.
        const double nu = w.dot(g) / w.sum();
        const Vec d = -lambda * w.cwiseProduct((g.array() - nu).matrix());
        if (d.lpNorm<Eigen::Infinity>() < 1e-17) break;
        double step = 1.0;
        for (Eigen::Index i = 0; i < w.size(); ++i)
            if (d(i) < 0.0) step = std::min(step, -0.99 * w(i) / d(i));
        const double f = objective(w), slope = g.dot(d);
        while (objective(w + step * d) > f + 1e-4 * step * slope && step > 1e-30) step *= 0.5;
        w += step * d;
    }
    return w;
}

/// Orthogonalization problem with every input drawn from a standard normal.
inline OrthoProblem random_ortho(std::mt19937_64& rng, int dy, int dz, int kept, int fresh, double zeta1, double zeta2) {
    std::vector<Mat> a, b;
    for (int k = 0; k < kept; ++k) a.push_back(gaussian_matrix(dy, dz, rng));
    for (int k = 0; k < fresh; ++k) b.push_back(gaussian_matrix(dy, dz, rng));
    return build_ortho_problem(a, b, gaussian_matrix(dz, 1, rng), gaussian_matrix(dy, 1, rng), zeta1, zeta2);
}

/// Smallest objective over uniformly drawn points of the feasible sphere.
inline double sampled_sphere_minimum(const OrthoProblem& p, int points, std::mt19937_64& rng) {
    const auto d2 = p.xi_I.size();
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < points; ++k) {
        Vec u = gaussian_matrix(d2, 1, rng);
        u *= p.zeta2 / u.norm();
        best = std::min(best, p.objective(Vec(p.xi_I + u)));
    }
    return best;
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("mfnash_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace mfnash::fx
