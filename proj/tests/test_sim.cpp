#include "support.hpp"

#include <gtest/gtest.h>

using namespace mfnash;
using mfnash::fx::scalar_game;
using mfnash::fx::scalar_targets;

namespace {

AgentPool pool_of(std::vector<double> preds, double z) {
    AgentPool pool;
    for (double y : preds) {
        pool.predictions.push_back(Vec::Constant(1, y));
        pool.latents.push_back(Mat::Constant(1, 1, z));
    }
    return pool;
}

/// Small RFN scenario in forecast or game mode on the logistic map.
Scenario encoder_scenario(int N, Mode mode, LatentKind kind) {
    DatasetSpec ds;
    ds.kind = DatasetKind::LogisticMap;
    ds.length = 40;
    ds.seed = 3;
    const Dataset d = generate_dataset(ds);
    Scenario sc;
    sc.params = GameParams::scalar(1, 3, 0.0, 0.0);
    sc.params.population_N = N;
    sc.params.horizon_T = 5;
    sc.params.kappa = 1.0;
    sc.params.kappa_bar = 0.3;
    sc.params.gamma = 0.2;
    sc.targets = d.targets;
    sc.features = d.features;
    sc.latent.kind = kind;
    sc.latent.mc_samples = 16;
    sc.mode = mode;
    sc.steps = 25;
    return sc;
}

void expect_identical(const RunRecord& a, const RunRecord& b) {
    ASSERT_EQ(a.stages.size(), b.stages.size());
    for (std::size_t t = 0; t < a.stages.size(); ++t) {
        for (std::size_t n = 0; n < a.stages[t].actions.size(); ++n) {
            EXPECT_EQ(a.stages[t].actions[n], b.stages[t].actions[n]);
            EXPECT_EQ(a.stages[t].pred_after[n], b.stages[t].pred_after[n]);
        }
        EXPECT_EQ(a.stages[t].aggregate, b.stages[t].aggregate);
    }
    EXPECT_EQ(a.J, b.J);
}

}  // namespace

TEST(StepDynamics, FrozenWithoutActions) {
    const AgentPool pool = pool_of({0.3, -1.0, 2.0}, 1.0);
    const GameParams p = scalar_game(3, 1, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0);
    const AgentPool next = step_dynamics(pool, std::vector<Vec>(3, Vec::Zero(1)), p);
    EXPECT_EQ(next.predictions, pool.predictions);
}

TEST(StepDynamics, ScalarHandStep) {
    const GameParams p = scalar_game(1, 1, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0);
    const AgentPool next = step_dynamics(pool_of({0.0}, 1.0), {Vec::Constant(1, 0.5)}, p);
    EXPECT_DOUBLE_EQ(next.predictions[0](0), 0.5);
    EXPECT_EQ(next.action_history[0].size(), 1u);
}

TEST(StepDynamics, MeanCouplingUsesCurrentMean) {
    const GameParams p = scalar_game(2, 1, 0.5, 0.2, 1.0, 0.0, 1.0, 0.0);
    const AgentPool next = step_dynamics(pool_of({1.0, 3.0}, 2.0), {Vec::Constant(1, 0.1), Vec::Zero(1)}, p);
    EXPECT_DOUBLE_EQ(next.predictions[0](0), 0.5 + 0.4 + 0.2);
    EXPECT_DOUBLE_EQ(next.predictions[1](0), 1.5 + 0.4);
}

TEST(StepDynamics, PermutationEquivariance) {
    std::mt19937_64 rng(1);
    GameParams p = GameParams::scalar(2, 3, 0.7, 0.2);
    p.population_N = 4;
    AgentPool pool;
    std::vector<Vec> actions;
    for (int n = 0; n < 4; ++n) {
        pool.predictions.push_back(gaussian_matrix(2, 1, rng));
        pool.latents.push_back(gaussian_matrix(2, 3, rng));
        actions.push_back(gaussian_matrix(3, 1, rng));
    }
    const std::vector<int> perm{2, 0, 3, 1};
    AgentPool permuted;
    std::vector<Vec> permuted_actions;
    for (int k : perm) {
        permuted.predictions.push_back(pool.predictions[static_cast<std::size_t>(k)]);
        permuted.latents.push_back(pool.latents[static_cast<std::size_t>(k)]);
        permuted_actions.push_back(actions[static_cast<std::size_t>(k)]);
    }
    const AgentPool a = step_dynamics(pool, actions, p);
    const AgentPool b = step_dynamics(permuted, permuted_actions, p);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_LE(max_abs(Vec(b.predictions[i] - a.predictions[static_cast<std::size_t>(perm[i])])), 1e-15);
}

TEST(StepDynamics, NonFiniteNamesTheAgent) {
    const GameParams p = scalar_game(2, 1, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0);
    try {
        (void)step_dynamics(pool_of({0.0, 0.0}, 1.0), {Vec::Zero(1), Vec::Constant(1, INFINITY)}, p);
        FAIL() << "expected DynamicsError";
    } catch (const DynamicsError& e) {
        EXPECT_NE(std::string(e.what()).find("agent 1"), std::string::npos);
    }
}

TEST(Objective, SingleAgentOptimalStep) {
    const GameParams p = scalar_game(1, 1, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0);
    const Scenario sc = fx::deterministic_scenario(p, scalar_targets({0.0, 1.0}), {Mat::Ones(1, 1)});
    const RunRecord rec = run_episode(Policy::Full, sc, 0);
    EXPECT_NEAR(rec.stages[0].actions[0](0), 0.5, 1e-15);
    EXPECT_NEAR(evaluate_objective(rec, 0, p), 0.5, 1e-15);
    EXPECT_NEAR(evaluate_objective(rec, 0, p, sc.targets), 0.5, 1e-15);
}

TEST(Objective, ZeroWeightsAndZeroActions) {
    const GameParams p = scalar_game(2, 3, 0.9, 0.1, 0.0, 0.0, 1.0, 0.2);
    const Scenario sc =
        fx::deterministic_scenario(p, scalar_targets({0.0, 1.0, -1.0, 2.0}), {Mat::Ones(1, 1)});
    const RunRecord rec = run_episode(Policy::Reduced, sc, 0);
    EXPECT_EQ(evaluate_objective(rec, 0, p), 0.0);
    EXPECT_EQ(evaluate_objective(rec, 1, p), 0.0);
}

TEST(Objective, LargeDiscountKeepsOnlyLastStage) {
    const GameParams p = scalar_game(2, 3, 0.9, 0.1, 1.0, 0.5, 0.7, 50.0);
    const Scenario sc =
        fx::deterministic_scenario(p, scalar_targets({0.0, 1.0, -1.0, 2.0}), {Mat::Ones(1, 1)});
    const RunRecord rec = run_episode(Policy::Reduced, sc, 0);
    RunRecord last = rec;
    last.stages = {rec.stages.back()};
    const double full = evaluate_objective(rec, 0, p);
    const double tail = evaluate_objective(last, 0, p);
    EXPECT_NEAR(full, tail, std::exp(-50.0) * 100.0);
    EXPECT_EQ(rec.stages.back().discount, 1.0);
}

TEST(Regret, Examples) {
    RunRecord r;
    r.J = {0.1, 0.7, 0.3};
    EXPECT_EQ(underperformer_regret(r), 0.7);
    r.J = {0.4, 0.4, 0.4};
    EXPECT_EQ(underperformer_regret(r), 0.4);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        r.J = {unif(rng), unif(rng), unif(rng), unif(rng)};
        const double before = underperformer_regret(r);
        r.J[static_cast<std::size_t>(k % 4)] += unif(rng);
        EXPECT_GE(underperformer_regret(r), before);
    }
}

TEST(Aggregation, Examples) {
    const std::vector<Vec> preds{Vec::Constant(1, 1.0), Vec::Constant(1, 3.0)};
    const Aggregate eq = aggregate_predictions(preds, {{0.4}, {0.4}}, 0.5, 5);
    EXPECT_NEAR(eq.weights(0), 0.5, 1e-15);
    const Aggregate a = aggregate_predictions(preds, {{0.0}, {std::log(3.0)}}, 0.5, 5);
    EXPECT_NEAR(a.weights(0), 0.75, 1e-15);
    EXPECT_NEAR(a.weights(1), 0.25, 1e-15);
    EXPECT_NEAR(a.prediction(0), 1.5, 1e-15);
    const Aggregate one = aggregate_predictions({Vec::Constant(1, 2.0)}, {{5.0}}, 0.5, 5);
    EXPECT_EQ(one.weights(0), 1.0);
}

TEST(Aggregation, DiscountedWindowedErrors) {
    // omega_0 = 1 + e^{-1} * 2 with the oldest entry dropped by the window.
    const std::vector<Vec> preds{Vec::Zero(1), Vec::Zero(1)};
    const Aggregate a = aggregate_predictions(preds, {{100.0, 2.0, 1.0}, {0.0, 0.0, 0.0}}, 1.0, 2);
    const double omega = 1.0 + std::exp(-1.0) * 2.0;
    EXPECT_NEAR(a.weights(0), std::exp(-omega) / (1.0 + std::exp(-omega)), 1e-15);
}

TEST(Aggregation, SimplexAndPermutationEquivariance) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unif(0.0, 3.0);
    std::vector<Vec> preds;
    std::vector<std::vector<double>> errs;
    for (int n = 0; n < 5; ++n) {
        preds.push_back(gaussian_matrix(2, 1, rng));
        errs.push_back({unif(rng), unif(rng), unif(rng)});
    }
    const Aggregate a = aggregate_predictions(preds, errs, 0.3, 3);
    EXPECT_NEAR(a.weights.sum(), 1.0, 1e-12);
    EXPECT_GE(a.weights.minCoeff(), 0.0);
    std::vector<Vec> rp(preds.rbegin(), preds.rend());
    std::vector<std::vector<double>> re(errs.rbegin(), errs.rend());
    const Aggregate b = aggregate_predictions(rp, re, 0.3, 3);
    for (int n = 0; n < 5; ++n) EXPECT_NEAR(b.weights(4 - n), a.weights(n), 1e-15);
    EXPECT_LE(max_abs(Vec(a.prediction - b.prediction)), 1e-14);
}

TEST(Episode, ZeroWeightsGiveIdenticalRecordsAcrossPolicies) {
    GameParams p = scalar_game(3, 4, 0.8, 0.1, 0.0, 0.0, 1.0, 0.1);
    for (Mode mode : {Mode::Game, Mode::Forecast}) {
        Scenario sc = encoder_scenario(3, mode, LatentKind::Rfn);
        sc.params.kappa = 0.0;
        sc.params.kappa_bar = 0.0;
        sc.params.theta = p.theta;
        sc.params.theta_bar = p.theta_bar;
        const RunRecord ref = run_episode(Policy::Full, sc, 5);
        for (const auto& st : ref.stages)
            for (const auto& b : st.actions) EXPECT_EQ(max_abs(b), 0.0);
        for (double J : ref.J) EXPECT_EQ(J, 0.0);
        for (Policy pol : {Policy::Reduced, Policy::Decentralized, Policy::Greedy})
            expect_identical(ref, run_episode(pol, sc, 5));
    }
}

TEST(Episode, FullAndReducedAgree) {
    for (int N : {2, 3, 5}) {
        const auto g = fx::random_game(N, 2, 4, 55);
        Scenario sc = fx::deterministic_scenario(g.params, g.targets, g.schedule);
        std::mt19937_64 rng(static_cast<std::uint64_t>(N));
        sc.targets = fx::random_targets(2, 13, rng);
        sc.steps = 12;
        const RunRecord a = run_episode(Policy::Full, sc, 0);
        const RunRecord b = run_episode(Policy::Reduced, sc, 0);
        for (std::size_t t = 0; t < a.stages.size(); ++t)
            for (int n = 0; n < N; ++n) {
                EXPECT_LE(max_abs(Vec(a.stages[t].actions[static_cast<std::size_t>(n)] -
                                      b.stages[t].actions[static_cast<std::size_t>(n)])),
                          1e-7);
                EXPECT_LE(max_abs(Vec(a.stages[t].pred_after[static_cast<std::size_t>(n)] -
                                      b.stages[t].pred_after[static_cast<std::size_t>(n)])),
                          1e-7);
            }
    }
}

TEST(Episode, SameSeedIsBitIdentical) {
    for (auto kind : {LatentKind::Rfn, LatentKind::Esn})
        for (Policy pol : {Policy::Reduced, Policy::Decentralized, Policy::Greedy}) {
            Scenario sc = encoder_scenario(4, Mode::Forecast, kind);
            sc.spawner.enabled = true;
            sc.spawner.retire_K = 1;
            sc.spawner.every = 7;
            sc.spawner.orthogonalize = true;
            sc.spawner.zeta1 = 0.1;
            sc.spawner.zeta2 = 0.5;
            const RunRecord a = run_episode(pol, sc, 17), b = run_episode(pol, sc, 17);
            expect_identical(a, b);
            EXPECT_EQ(a.spawn_events.size(), 3u);
            const RunRecord c = run_episode(pol, sc, 18);
            EXPECT_NE(a.J, c.J);
        }
}

TEST(Episode, GameModeResetsEachRound) {
    Scenario sc = encoder_scenario(3, Mode::Game, LatentKind::Rfn);
    const RunRecord rec = run_episode(Policy::Reduced, sc, 1);
    for (const auto& st : rec.stages)
        if (st.local_t == 0) {
            for (const auto& y : st.pred_before) EXPECT_EQ(y, sc.targets.values[static_cast<std::size_t>(st.t)]);
        }
    EXPECT_EQ(rec.stages.back().round, 4);
}

TEST(Episode, SpawnerRunsBetweenRoundsAndKeepsSolverResidualsSmall) {
    Scenario sc = encoder_scenario(6, Mode::Game, LatentKind::Esn);
    sc.spawner.enabled = true;
    sc.spawner.retire_K = 2;
    sc.spawner.orthogonalize = true;
    sc.spawner.zeta1 = 0.2;
    sc.spawner.zeta2 = 0.4;
    const RunRecord rec = run_episode(Policy::Decentralized, sc, 4);
    ASSERT_EQ(rec.spawn_events.size(), 4u);
    for (const auto& ev : rec.spawn_events) {
        EXPECT_EQ(ev.t % 5, 0);
        EXPECT_EQ(ev.retired.size(), 2u);
        EXPECT_NEAR(ev.weights.sum(), 1.0, 1e-12);
        for (double r : ev.kkt_residual) EXPECT_LE(r, 1e-8);
        for (double r : ev.constraint_residual) EXPECT_LE(r, 1e-8);
    }
}

TEST(Episode, SpawnerNeedsEncoders) {
    const auto g = fx::random_game(3, 1, 3, 1);
    Scenario sc = fx::deterministic_scenario(g.params, g.targets, g.schedule);
    sc.spawner.enabled = true;
    EXPECT_THROW(run_episode(Policy::Reduced, sc, 0), SpecError);
}

TEST(Episode, MetricsAndMessages) {
    Scenario sc = encoder_scenario(10, Mode::Forecast, LatentKind::Rfn);
    const RunRecord rec = run_episode(Policy::Decentralized, sc, 2);
    EXPECT_EQ(rec.messages, 10L * 25);
    EXPECT_EQ(run_episode(Policy::Greedy, sc, 2).messages, 20L * 25);
    double worst = 0.0;
    for (double r : rec.rmse_agent) worst = std::max(worst, r);
    EXPECT_EQ(rec.rmse_worst, worst);
    std::vector<double> sorted = rec.rmse_agent;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    EXPECT_NEAR(rec.rmse_bottom20, 0.5 * (sorted[0] + sorted[1]), 1e-15);
    EXPECT_EQ(rec.regret, *std::max_element(rec.J.begin(), rec.J.end()));
}

TEST(Episode, ForecastModeStartsFromZeroAction) {
    Scenario sc = encoder_scenario(3, Mode::Forecast, LatentKind::Rfn);
    for (Policy pol : {Policy::Full, Policy::Reduced, Policy::Decentralized, Policy::Greedy}) {
        const RunRecord rec = run_episode(pol, sc, 9);
        for (const auto& b : rec.stages.front().actions) EXPECT_EQ(max_abs(b), 0.0);
    }
}

TEST(NashDeviation, RandomPerturbationsNeverHelp) {
    const auto g = fx::random_game(3, 2, 5, 91);
    const Scenario base = fx::deterministic_scenario(g.params, g.targets, g.schedule);
    const RunRecord eq = run_episode(Policy::Full, base, 0);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> who(0, 2);
    std::uniform_real_distribution<double> radius(0.0, 0.1);
    double worst_gain = -1e300;
    for (int k = 0; k < 200; ++k) {
        Scenario sc = base;
        Deviation d;
        d.agent = who(rng);
        Vec flat = gaussian_matrix(10, 1, rng);
        flat *= radius(rng) / flat.norm();
        for (int t = 0; t < 5; ++t) d.offsets.push_back(flat.segment(2 * t, 2));
        sc.deviation = d;
        const RunRecord dev = run_episode(Policy::Full, sc, 0);
        const double gain = eq.J[static_cast<std::size_t>(d.agent)] - dev.J[static_cast<std::size_t>(d.agent)];
        worst_gain = std::max(worst_gain, gain);
        // When the deviator is the worst-off agent, regret cannot drop.
        if (eq.J[static_cast<std::size_t>(d.agent)] == underperformer_regret(eq)) {
            EXPECT_GE(underperformer_regret(dev), underperformer_regret(eq) - 1e-6);
        }
    }
    EXPECT_LE(worst_gain, 1e-6);
}

TEST(NashDeviation, EquilibriumIsStationaryAndConvex) {
    // J_n is quadratic in the deviator's offsets: central differences give the
    // exact gradient and Hessian, which must vanish and be positive definite.
    const auto g = fx::random_game(2, 1, 4, 92);
    const Scenario base = fx::deterministic_scenario(g.params, g.targets, g.schedule);
    for (int agent = 0; agent < 2; ++agent) {
        auto cost = [&](const Vec& off) {
            Scenario sc = base;
            Deviation d;
            d.agent = agent;
            for (int t = 0; t < 4; ++t) d.offsets.push_back(off.segment(t, 1));
            sc.deviation = d;
            return run_episode(Policy::Full, sc, 0).J[static_cast<std::size_t>(agent)];
        };
        const double h = 1e-3;
        const double J0 = cost(Vec::Zero(4));
        Vec grad(4);
        Mat hess(4, 4);
        for (int i = 0; i < 4; ++i) {
            const Vec ei = h * Vec::Unit(4, i);
            grad(i) = (cost(ei) - cost(-ei)) / (2 * h);
            for (int j = 0; j < 4; ++j) {
                const Vec ej = h * Vec::Unit(4, j);
                hess(i, j) = (cost(ei + ej) - cost(ei - ej) - cost(-ei + ej) + cost(-ei - ej)) / (4 * h * h);
            }
        }
        EXPECT_LE(grad.lpNorm<Eigen::Infinity>(), 1e-7) << "agent " << agent;
        const Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (hess + hess.transpose()));
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
        // The best response offset from the quadratic model is zero.
        const Vec best = -hess.ldlt().solve(grad);
        EXPECT_LE(best.lpNorm<Eigen::Infinity>(), 1e-6);
        EXPECT_GT(J0, 0.0);
    }
}
