// Self-check suites run by the `verify` command.
//
// structure    full-solver block pattern, full versus reduced actions and
//              block-inverse identities on seeded homogeneous scenarios
// qp           orthogonalization QP residuals, sphere sampling and the
//              resolvent identity on seeded random instances
// convergence  finite-N gaps on a small grid with the two-standard-error
//              monotonicity check

#pragma once

#include "mfnash/core.hpp"
#include "mfnash/diagnostics.hpp"
#include "mfnash/nash_full.hpp"
#include "mfnash/nash_reduced.hpp"
#include "mfnash/random.hpp"
#include "mfnash/spawner.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace mfnash {

struct Check {
    std::string name;
    double value{0.0};
    double tolerance{0.0};
    bool pass{false};
};

struct SuiteResult {
    std::string name;
    std::vector<Check> checks;

    [[nodiscard]] bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }
};

namespace detail {

inline Check at_most(std::string name, double value, double tol) {
    return {std::move(name), value, tol, value <= tol};
}

/// Homogeneous scenario with a deterministic latent schedule shared by all agents.
struct SolverFixture {
    GameParams params;
    MomentSet moments;
    TargetSeries targets;
};

inline SolverFixture solver_fixture(int N, int d, int T, std::uint64_t seed) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(d * 100 + T), Stream::Initial);
    std::uniform_real_distribution<double> unif(0.1, 0.9);
    SolverFixture f;
    f.params = GameParams::scalar(d, d, 0.0, 0.0);
    f.params.theta = 0.5 * gaussian_matrix(d, d, rng) / std::sqrt(static_cast<double>(d));
    f.params.theta_bar = 0.3 * gaussian_matrix(d, d, rng) / std::sqrt(static_cast<double>(d));
    f.params.kappa = 1.0;
    f.params.kappa_bar = unif(rng);
    f.params.gamma = unif(rng);
    f.params.alpha = 0.2 * unif(rng);
    f.params.horizon_T = T;
    f.params.population_N = N;
    std::vector<Mat> schedule;
    for (int t = 0; t < T; ++t) schedule.push_back(gaussian_matrix(d, d, rng));
    f.moments = exact_moments_deterministic(schedule);
    for (int t = 0; t <= T; ++t) f.targets.values.push_back(gaussian_matrix(d, 1, rng));
    return f;
}

}  // namespace detail

inline SuiteResult verify_structure_suite(std::uint64_t seed = 11) {
    SuiteResult r{"structure", {}};
    double structure = 0.0, actions = 0.0, inverse = 0.0;
    for (int N : {2, 3, 5})
        for (int d : {1, 2})
            for (int T : {3, 8}) {
                const auto f = detail::solver_fixture(N, d, T, seed);
                const FullNashCoeffs full = full_backward_pass(f.params, f.moments, f.targets);
                const ReducedCoeffs red = reduced_backward_pass(f.params, f.moments, f.targets);
                structure = std::max(structure, check_block_structure(full).max_deviation);
                for (double res : red.inverse_residual) inverse = std::max(inverse, res);
                auto rng = make_rng(seed, static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(T), Stream::Realized);
                for (int t = 0; t < T; ++t) {
                    const Vec Y = gaussian_matrix(N * d, 1, rng);
                    const Vec beta = full_action(t, Y, full);
                    const Vec total = Y.reshaped(d, N).rowwise().sum();
                    for (int n = 0; n < N; ++n) {
                        const Vec own = Y.segment(n * d, d);
                        const Vec b = reduced_action(t, own, total - own, red);
                        actions = std::max(actions, max_abs(Vec(beta.segment(n * d, d) - b)));
                    }
                }
            }
    r.checks.push_back(detail::at_most("block structure deviation", structure, kTolerances.symmetry));
    r.checks.push_back(detail::at_most("full vs reduced actions", actions, 1e-7));
    r.checks.push_back(detail::at_most("block-inverse identities", inverse, kTolerances.structural));
    return r;
}

inline SuiteResult verify_qp_suite(std::uint64_t seed = 13, int instances = 20, int sphere_points = 2000) {
    SuiteResult r{"qp", {}};
    double kkt = 0.0, constraint = 0.0, sampling = -1e300, resolvent = 0.0;
    for (int i = 0; i < instances; ++i) {
        auto rng = make_rng(seed, static_cast<std::uint64_t>(i), 0, Stream::Initial);
        const int dz = 1 + i % 3;
        const int dy = 1 + i % 2;
        std::vector<Mat> kept, fresh;
        for (int k = 0; k < 2; ++k) kept.push_back(gaussian_matrix(dy, dz, rng));
        fresh.push_back(gaussian_matrix(dy, dz, rng));
        const Vec beta = gaussian_matrix(dz, 1, rng);
        const Vec y = gaussian_matrix(dy, 1, rng);
        const OrthoProblem p = build_ortho_problem(kept, fresh, beta, y, 0.5, 0.3 + 0.1 * (i % 5));
        const OrthoSolution s = ortho_solve(p);
        kkt = std::max(kkt, s.kkt_residual);
        constraint = std::max(constraint, s.constraint_residual);
        std::normal_distribution<double> nd;
        for (int k = 0; k < sphere_points; ++k) {
            Vec u(p.xi_I.size());
            for (Eigen::Index j = 0; j < u.size(); ++j) u(j) = nd(rng);
            u *= p.zeta2 / u.norm();
            sampling = std::max(sampling, s.objective - p.objective(Vec(p.xi_I + u)));
        }
        resolvent = std::max(resolvent, resolvent_check(p.Q, 0.5, 2.0));
    }
    r.checks.push_back(detail::at_most("KKT residual", kkt, 1e-8));
    r.checks.push_back(detail::at_most("constraint residual", constraint, 1e-8));
    r.checks.push_back(detail::at_most("objective minus best sampled point", sampling, 1e-8));
    r.checks.push_back(detail::at_most("resolvent identity", resolvent, 1e-11));
    return r;
}

inline SuiteResult verify_convergence_suite(std::uint64_t seed = 17) {
    SuiteResult r{"convergence", {}};
    ConvergenceConfig cfg = default_convergence_config();
    cfg.n_grid = {4, 16, 64};
    cfg.paths = 60;
    cfg.seed = seed;
    const GapReport rep = limit_gap_diagnostic(cfg);
    r.checks.push_back({"mean-field gap non-increasing within 2 se", rep.meanfield_non_increasing ? 1.0 : 0.0, 1.0,
                        rep.meanfield_non_increasing});
    r.checks.push_back({"lambda gap strictly decreasing", rep.lambda_strictly_decreasing ? 1.0 : 0.0, 1.0,
                        rep.lambda_strictly_decreasing});
    return r;
}

}  // namespace mfnash
