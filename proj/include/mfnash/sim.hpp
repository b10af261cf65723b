// Forward simulation of the N-agent prediction system.
//
// Two protocols are supported.
//
// Game mode replays the finite-horizon game in rounds of length T. At each
// round start every prediction is reset to the current target, the chosen
// policy is planned over the round from the latent moments, and the
// feedback law is applied to the realized latents.
//
// Forecast mode is an online protocol without look-ahead. At step t the
// game is planned over the trailing window of Tw = min(T, t) stages that
// ends with the latest observed target y_t, the window is replayed from
// y_{t-Tw} on the realized latents, and the action of its last stage is
// applied to the current latent Z_t to forecast y_{t+1}.
//
// In both modes the greedy baseline fits a discounted ridge regression on
// its own recent residuals, and costs are sample-path costs.

#pragma once

#include "mfnash/core.hpp"
#include "mfnash/greedy.hpp"
#include "mfnash/latent.hpp"
#include "mfnash/model.hpp"
#include "mfnash/nash_decentralized.hpp"
#include "mfnash/nash_full.hpp"
#include "mfnash/nash_reduced.hpp"
#include "mfnash/random.hpp"
#include "mfnash/spawner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace mfnash {

enum class Policy { Full, Reduced, Decentralized, Greedy };

inline Policy parse_policy(const std::string& name) {
    if (name == "full") return Policy::Full;
    if (name == "reduced") return Policy::Reduced;
    if (name == "decentralized") return Policy::Decentralized;
    if (name == "greedy") return Policy::Greedy;
    throw SpecError("unknown policy '" + name + "'");
}

inline std::string to_string(Policy p) {
    switch (p) {
        case Policy::Full: return "full";
        case Policy::Reduced: return "reduced";
        case Policy::Decentralized: return "decentralized";
        case Policy::Greedy: return "greedy";
    }
    return "unknown";
}

/// Messages exchanged per step: centralized policies upload predictions and
/// receive actions, the greedy baseline uploads predictions and receives the
/// broadcast mean, decentralized agents only report their predictions.
inline long messages_per_step(Policy p, int N) {
    return p == Policy::Decentralized ? static_cast<long>(N) : 2L * N;
}

/// Per-agent state of the population at one timestep.
struct AgentPool {
    std::vector<Vec> predictions;               ///< Yhat^n_t
    std::vector<Mat> latents;                   ///< Z^n_t
    std::vector<std::vector<Vec>> action_history;  ///< beta^n_0, ..., beta^n_{t-1}
    std::vector<Vec> params;                    ///< flattened encoder parameters, if any

    [[nodiscard]] int size() const { return static_cast<int>(predictions.size()); }

    /// Arithmetic mean prediction Y^(N)_t.
    [[nodiscard]] Vec mean() const {
        if (predictions.empty()) throw RangeError("empty agent pool");
        Vec m = Vec::Zero(predictions.front().size());
        for (const auto& y : predictions) m += y;
        return m / static_cast<double>(predictions.size());
    }
};

/// Yhat^n_{t+1} = theta Yhat^n_t + theta_bar Y^(N)_t + Z^n_t beta^n_t.
inline AgentPool step_dynamics(const AgentPool& pool, const std::vector<Vec>& actions, const GameParams& p) {
    const int N = pool.size();
    if (static_cast<int>(actions.size()) != N) throw RangeError("step_dynamics: need one action per agent");
    if (static_cast<int>(pool.latents.size()) != N) throw RangeError("step_dynamics: need one latent per agent");
    AgentPool next = pool;
    const Vec mean = pool.mean();
    const Vec pull = p.theta_bar * mean;
    if (next.action_history.size() != static_cast<std::size_t>(N)) next.action_history.resize(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        const auto i = static_cast<std::size_t>(n);
        Vec y = p.theta * pool.predictions[i] + pull + pool.latents[i] * actions[i];
        if (!y.allFinite()) throw DynamicsError("non-finite prediction for agent " + std::to_string(n));
        next.predictions[i] = std::move(y);
        next.action_history[i].push_back(actions[i]);
    }
    return next;
}

/// Retire-and-resample on a pool's flattened parameters; retired slots take
/// their parent's prediction.
inline AgentPool retire_and_resample(const AgentPool& pool, SpawnerState& state, std::mt19937_64& rng,
                                     SpawnResult* details = nullptr) {
    SpawnResult r = retire_and_resample(pool.params, state, rng);
    AgentPool out = pool;
    out.params = r.params;
    for (std::size_t k = 0; k < r.ranking.retired.size(); ++k)
        out.predictions[static_cast<std::size_t>(r.ranking.retired[k])] =
            pool.predictions[static_cast<std::size_t>(r.parents[k])];
    if (details) *details = std::move(r);
    return out;
}

/// Score-based aggregate and its softmax weights.
struct Aggregate {
    Vec prediction;
    Vec weights;
};

/// omega^n = sum_s e^{-alpha_a (t - s)} e^n_s over the last window_Ta entries
/// of each agent's squared-error history (newest last), w = softmax(-omega).
inline Aggregate aggregate_predictions(const std::vector<Vec>& predictions,
                                       const std::vector<std::vector<double>>& recent_sq_errors,
                                       double alpha_a, int window_Ta) {
    const auto N = predictions.size();
    if (N == 0) throw RangeError("aggregate_predictions: empty pool");
    if (recent_sq_errors.size() != N) throw RangeError("aggregate_predictions: need one error history per agent");
    if (window_Ta < 1) throw ParamError("aggregate_predictions: window must be positive");
    Vec omega = Vec::Zero(static_cast<Eigen::Index>(N));
    for (std::size_t n = 0; n < N; ++n) {
        const auto& e = recent_sq_errors[n];
        const auto used = std::min<std::size_t>(e.size(), static_cast<std::size_t>(window_Ta));
        for (std::size_t k = 0; k < used; ++k) {
            const double age = static_cast<double>(k);
            omega(static_cast<Eigen::Index>(n)) += std::exp(-alpha_a * age) * e[e.size() - 1 - k];
        }
    }
    Aggregate out;
    const double lo = omega.minCoeff();
    out.weights = (-(omega.array() - lo)).exp().matrix();
    out.weights /= out.weights.sum();
    out.prediction = Vec::Zero(predictions.front().size());
    for (std::size_t n = 0; n < N; ++n) out.prediction += out.weights(static_cast<Eigen::Index>(n)) * predictions[n];
    return out;
}

enum class Mode { Game, Forecast };

inline Mode parse_mode(const std::string& name) {
    if (name == "game") return Mode::Game;
    if (name == "forecast") return Mode::Forecast;
    throw SpecError("unknown mode '" + name + "'");
}

inline std::string to_string(Mode m) { return m == Mode::Game ? "game" : "forecast"; }

struct AggregationConfig {
    double alpha_a{0.5};
    int window_Ta{5};
};

struct SpawnerConfig {
    bool enabled{false};
    int retire_K{1};
    std::vector<double> lambda_schedule{1.0};
    std::vector<double> sigma_schedule{0.1};
    int every{10};              ///< forecast mode: steps between rounds
    bool orthogonalize{false};  ///< post-compose respawned latents with the QP solution
    double zeta1{0.0};
    double zeta2{0.0};
};

/// Unilateral deviation: beta^agent_t += offsets[t].
struct Deviation {
    int agent{0};
    std::vector<Vec> offsets;
};

struct Scenario {
    GameParams params;  ///< horizon_T is the round length (game) or window (forecast)
    TargetSeries targets;
    std::vector<Vec> features;  ///< features[i] predicts targets[i]; needed by encoder latents
    LatentSpec latent;
    Mode mode{Mode::Game};
    int steps{0};  ///< simulated steps; 0 means as many as the targets allow
    AggregationConfig aggregation;
    RidgeConfig ridge;
    SpawnerConfig spawner;
    std::optional<Deviation> deviation;

    [[nodiscard]] int resolved_steps() const {
        const int available = targets.length() - 1;
        return steps > 0 ? std::min(steps, available) : available;
    }
};

/// Everything recorded about one simulated step.
struct StageRecord {
    int t{0};
    int round{0};
    int local_t{0};
    double discount{1.0};
    Vec target;                    ///< y_{t+1}
    std::vector<Vec> pred_before;  ///< Yhat^n_t
    std::vector<Vec> actions;      ///< beta^n_t
    std::vector<Vec> pred_after;   ///< Yhat^n_{t+1}
    Vec aggregate;                 ///< aggregated forecast of y_{t+1}
    Vec aggregate_weights;
};

struct SpawnEvent {
    int t{0};
    std::vector<int> retired;
    std::vector<int> parents;
    Vec posterior;
    Vec weights;
    std::vector<double> lambda_star;
    std::vector<double> kkt_residual;
    std::vector<double> constraint_residual;
};

struct RunRecord {
    Policy policy{Policy::Reduced};
    Mode mode{Mode::Game};
    int N{0};
    std::uint64_t seed{0};
    GameParams params;
    std::vector<StageRecord> stages;
    std::vector<double> J;  ///< sample-path cost per agent
    double regret{0.0};     ///< max_n J_n
    std::vector<double> rmse_agent;
    double rmse_agg{0.0};
    double rmse_worst{0.0};
    double rmse_bottom20{0.0};
    long messages{0};
    double runtime_ms{0.0};
    std::vector<SpawnEvent> spawn_events;
};

/// J_n = sum_t delta_t [kappa ||y_{t+1} - Y^n_{t+1}||^2 + kappa_bar ||Y^n_{t+1} - Y^(N)_{t+1}||^2 + gamma ||beta^n_t||^2],
/// with each stage's recorded target and discount.
inline double evaluate_objective(const RunRecord& record, int agent, const GameParams& p) {
    if (record.stages.empty()) throw RangeError("evaluate_objective: empty trajectory");
    double J = 0.0;
    for (const auto& st : record.stages) {
        const int N = static_cast<int>(st.pred_after.size());
        if (agent < 0 || agent >= N) throw RangeError("evaluate_objective: agent out of range");
        if (static_cast<int>(st.actions.size()) != N || st.target.size() == 0)
            throw RangeError("evaluate_objective: incomplete stage at t=" + std::to_string(st.t));
        Vec mean = Vec::Zero(st.target.size());
        for (const auto& y : st.pred_after) mean += y;
        mean /= static_cast<double>(N);
        const auto i = static_cast<std::size_t>(agent);
        J += st.discount * (p.kappa * (st.target - st.pred_after[i]).squaredNorm() +
                            p.kappa_bar * (st.pred_after[i] - mean).squaredNorm() +
                            p.gamma * st.actions[i].squaredNorm());
    }
    return J;
}

/// Same cost with targets taken from a series indexed by global time.
inline double evaluate_objective(const RunRecord& record, int agent, const GameParams& p, const TargetSeries& targets) {
    RunRecord copy = record;
    for (auto& st : copy.stages) {
        if (st.t + 1 >= targets.length()) throw RangeError("evaluate_objective: targets too short");
        st.target = targets.values[static_cast<std::size_t>(st.t + 1)];
    }
    return evaluate_objective(copy, agent, p);
}

/// Under-performer regret max_n J_n.
inline double underperformer_regret(const RunRecord& record) {
    if (record.J.empty()) throw RangeError("underperformer_regret: no costs recorded");
    return *std::max_element(record.J.begin(), record.J.end());
}

namespace detail {

/// Coefficients of one planned horizon.
struct Plan {
    Policy policy{Policy::Reduced};
    int T{0};
    FullNashCoeffs full;
    ReducedCoeffs reduced;
    std::vector<DecentralizedCoeffs> dec;  ///< one per agent, or a single shared entry
    std::vector<MeanFieldTrajectory> ybar;

    [[nodiscard]] const DecentralizedCoeffs& dec_for(int n) const {
        return dec.size() == 1 ? dec.front() : dec[static_cast<std::size_t>(n)];
    }
    [[nodiscard]] const MeanFieldTrajectory& ybar_for(int n) const {
        return ybar.size() == 1 ? ybar.front() : ybar[static_cast<std::size_t>(n)];
    }
};

inline Plan plan_horizon(Policy policy, const GameParams& p, const TargetSeries& targets, LatentProcess& lat,
                         int t0) {
    Plan plan;
    plan.policy = policy;
    plan.T = p.horizon_T;
    switch (policy) {
        case Policy::Full: {
            const MomentSet mom = estimate_moments(lat.pooled_bank(t0, p.horizon_T));
            plan.full = full_backward_pass(p, mom, targets);
            break;
        }
        case Policy::Reduced: {
            const MomentSet mom = estimate_moments(lat.pooled_bank(t0, p.horizon_T));
            plan.reduced = reduced_backward_pass(p, mom, targets);
            break;
        }
        case Policy::Decentralized: {
            const int count = lat.spec().agent_independent_bank() ? 1 : lat.size();
            for (int n = 0; n < count; ++n) {
                const MomentSet mom = estimate_moments(lat.agent_bank(n, t0, p.horizon_T));
                plan.dec.push_back(decentralized_backward_pass(p, mom, targets));
                plan.ybar.push_back(meanfield_forward(plan.dec.back(), p, mom, targets.values.front()));
            }
            break;
        }
        case Policy::Greedy: break;
    }
    return plan;
}

/// Feedback actions of a planned policy at local stage s.
inline std::vector<Vec> plan_actions(const Plan& plan, int s, const std::vector<Vec>& preds) {
    const int N = static_cast<int>(preds.size());
    std::vector<Vec> out(static_cast<std::size_t>(N));
    switch (plan.policy) {
        case Policy::Full: {
            const int dy = plan.full.dim_y;
            const int dz = plan.full.dim_z;
            Vec stacked(N * dy);
            for (int n = 0; n < N; ++n) stacked.segment(n * dy, dy) = preds[static_cast<std::size_t>(n)];
            const Vec beta = full_action(s, stacked, plan.full);
            for (int n = 0; n < N; ++n) out[static_cast<std::size_t>(n)] = beta.segment(n * dz, dz);
            break;
        }
        case Policy::Reduced: {
            Vec total = Vec::Zero(preds.front().size());
            for (const auto& y : preds) total += y;
            for (int n = 0; n < N; ++n) {
                const auto& own = preds[static_cast<std::size_t>(n)];
                out[static_cast<std::size_t>(n)] = reduced_action(s, own, total - own, plan.reduced);
            }
            break;
        }
        case Policy::Decentralized: {
            for (int n = 0; n < N; ++n)
                out[static_cast<std::size_t>(n)] =
                    decentralized_action(s, preds[static_cast<std::size_t>(n)],
                                         plan.ybar_for(n).ybar[static_cast<std::size_t>(s)], plan.dec_for(n));
            break;
        }
        case Policy::Greedy: throw SpecError("greedy actions are not planned");
    }
    return out;
}

/// Greedy ridge action of agent n at time t from its residual history.
inline Vec greedy_action(const GameParams& p, const RidgeConfig& cfg, LatentProcess& lat, int n,
                         const std::vector<Vec>& residuals, int t) {
    if (t == 0 || residuals.empty()) return Vec::Zero(p.dim_z);
    const double w = std::sqrt(p.kappa);
    const int first = std::max(0, t - cfg.window_T);
    std::vector<RidgeSample> hist;
    for (int s = first; s < t; ++s)
        hist.push_back({w * lat.realized(n, s), w * residuals[static_cast<std::size_t>(s)]});
    return ridge_action(hist, cfg);
}

inline double rmse(double sum_sq, long count) { return count > 0 ? std::sqrt(sum_sq / static_cast<double>(count)) : 0.0; }

inline void finalize_metrics(RunRecord& rec, const GameParams& p) {
    const int N = rec.N;
    rec.J.assign(static_cast<std::size_t>(N), 0.0);
    for (int n = 0; n < N; ++n) rec.J[static_cast<std::size_t>(n)] = evaluate_objective(rec, n, p);
    rec.regret = underperformer_regret(rec);
    std::vector<double> agent_sq(static_cast<std::size_t>(N), 0.0);
    double agg_sq = 0.0;
    long count = 0;
    for (const auto& st : rec.stages) {
        agg_sq += (st.target - st.aggregate).squaredNorm();
        for (int n = 0; n < N; ++n)
            agent_sq[static_cast<std::size_t>(n)] += (st.target - st.pred_after[static_cast<std::size_t>(n)]).squaredNorm();
        count += st.target.size();
    }
    rec.rmse_agg = rmse(agg_sq, count);
    rec.rmse_agent.clear();
    for (double s : agent_sq) rec.rmse_agent.push_back(rmse(s, count));
    std::vector<double> sorted = rec.rmse_agent;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    rec.rmse_worst = sorted.front();
    const auto tail = static_cast<std::size_t>(std::max(1, (N + 4) / 5));
    double acc = 0.0;
    for (std::size_t i = 0; i < tail; ++i) acc += sorted[i];
    rec.rmse_bottom20 = acc / static_cast<double>(tail);
}

/// Replays a planned window from a common start and returns its last-stage actions.
inline std::vector<Vec> replay_window(const Plan& plan, const GameParams& p, LatentProcess& lat, const Vec& y_start,
                                      int t0, int N) {
    AgentPool pool;
    pool.predictions.assign(static_cast<std::size_t>(N), y_start);
    pool.latents.resize(static_cast<std::size_t>(N));
    std::vector<Vec> beta;
    for (int s = 0; s < plan.T; ++s) {
        beta = plan_actions(plan, s, pool.predictions);
        if (s + 1 == plan.T) break;
        for (int n = 0; n < N; ++n) pool.latents[static_cast<std::size_t>(n)] = lat.realized(n, t0 + s);
        pool = step_dynamics(pool, beta, p);
    }
    return beta;
}

}  // namespace detail

/// Simulates one episode of a scenario under a policy.
inline RunRecord run_episode(Policy policy, const Scenario& sc, std::uint64_t seed) {
    const auto started = std::chrono::steady_clock::now();
    const GameParams& base = sc.params;
    base.validate();
    sc.ridge.validate();
    const int N = base.population_N;
    const int T = base.horizon_T;
    const int steps = sc.resolved_steps();
    if (steps < 1) throw ParamError("scenario has no steps to simulate");
    for (const auto& y : sc.targets.values)
        if (y.size() != base.dim_y || !y.allFinite()) throw ParamError("targets must be finite d_y vectors");
    if (sc.spawner.enabled && !sc.latent.is_encoder())
        throw SpecError("the spawner requires encoder latents");
    if (sc.spawner.enabled && (sc.spawner.retire_K < 1 || sc.spawner.retire_K >= N))
        throw ParamError("spawner retire_K must satisfy 1 <= K < N");

    LatentProcess lat(sc.latent, base.dim_y, base.dim_z, N, seed, sc.features.empty() ? nullptr : &sc.features);
    const auto& y = sc.targets.values;

    RunRecord rec;
    rec.policy = policy;
    rec.mode = sc.mode;
    rec.N = N;
    rec.seed = seed;
    rec.params = base;

    AgentPool pool;
    pool.predictions.assign(static_cast<std::size_t>(N), y.front());
    pool.latents.resize(static_cast<std::size_t>(N));
    pool.action_history.resize(static_cast<std::size_t>(N));
    std::vector<std::vector<double>> sq_err(static_cast<std::size_t>(N), std::vector<double>{0.0});
    std::vector<std::vector<Vec>> residuals(static_cast<std::size_t>(N));

    std::optional<SpawnerState> spawn_state;
    if (sc.spawner.enabled)
        spawn_state = SpawnerState::uniform(N, sc.spawner.retire_K, sc.spawner.lambda_schedule,
                                            sc.spawner.sigma_schedule);

    auto spawn = [&](int t) {
        // Scores use the latest completed step; replacements inherit their parent's history.
        Vec scores(N);
        for (int n = 0; n < N; ++n) scores(n) = sq_err[static_cast<std::size_t>(n)].back();
        spawn_state->scores = scores;
        pool.params.clear();
        for (int n = 0; n < N; ++n) pool.params.push_back(lat.params(n));
        auto rng = make_rng(seed, 0, static_cast<std::uint64_t>(t), Stream::Spawner);
        SpawnResult details;
        pool = retire_and_resample(pool, *spawn_state, rng, &details);
        SpawnEvent ev;
        ev.t = t;
        ev.retired = details.ranking.retired;
        ev.parents = details.parents;
        ev.posterior = details.posterior;
        ev.weights = details.next_weights;
        std::vector<Mat> kept_Z;
        for (int n : details.ranking.retained) kept_Z.push_back(lat.realized(n, std::max(t - 1, 0)));
        Vec beta_avg = Vec::Zero(base.dim_z);
        int seen = 0;
        for (const auto& h : pool.action_history)
            if (!h.empty()) {
                beta_avg += h.back();
                ++seen;
            }
        if (seen > 0) beta_avg /= seen;
        for (std::size_t k = 0; k < details.ranking.retired.size(); ++k) {
            const int slot = details.ranking.retired[k];
            const int parent = details.parents[k];
            lat.replace(slot, details.params[static_cast<std::size_t>(slot)], Mat::Identity(base.dim_z, base.dim_z));
            if (sc.spawner.orthogonalize && sc.spawner.zeta2 > 0.0) {
                const OrthoProblem prob = build_ortho_problem(kept_Z, {lat.realized(slot, std::max(t - 1, 0))},
                                                              beta_avg, y[static_cast<std::size_t>(t)],
                                                              sc.spawner.zeta1, sc.spawner.zeta2);
                const OrthoSolution sol = ortho_solve(prob);
                lat.set_post(slot, sol.A_star);
                ev.lambda_star.push_back(sol.lambda_star);
                ev.kkt_residual.push_back(sol.kkt_residual);
                ev.constraint_residual.push_back(sol.constraint_residual);
            }
            sq_err[static_cast<std::size_t>(slot)] = sq_err[static_cast<std::size_t>(parent)];
            residuals[static_cast<std::size_t>(slot)] = residuals[static_cast<std::size_t>(parent)];
        }
        rec.spawn_events.push_back(std::move(ev));
    };

    detail::Plan plan;
    GameParams round_params = base;
    int round = 0;
    int round_start = 0;

    for (int t = 0; t < steps; ++t) {
        StageRecord st;
        st.t = t;
        std::vector<Vec> beta(static_cast<std::size_t>(N), Vec::Zero(base.dim_z));

        if (sc.mode == Mode::Game) {
            if (t % T == 0) {
                if (t > 0 && spawn_state) spawn(t);
                round = t / T;
                round_start = t;
                round_params = base;
                round_params.horizon_T = std::min(T, steps - t);
                for (int n = 0; n < N; ++n) {
                    pool.predictions[static_cast<std::size_t>(n)] = y[static_cast<std::size_t>(t)];
                    sq_err[static_cast<std::size_t>(n)].back() = 0.0;
                }
                if (policy != Policy::Greedy)
                    plan = detail::plan_horizon(policy, round_params,
                                                sc.targets.slice(t, round_params.horizon_T + 1), lat, t);
            }
            st.round = round;
            st.local_t = t - round_start;
            st.discount = round_params.discount(st.local_t);
            if (policy != Policy::Greedy) beta = detail::plan_actions(plan, st.local_t, pool.predictions);
        } else {
            st.round = spawn_state ? static_cast<int>(rec.spawn_events.size()) : 0;
            st.local_t = t;
            st.discount = 1.0;
            const int Tw = std::min(T, t);
            if (policy != Policy::Greedy && Tw > 0) {
                GameParams wp = base;
                wp.horizon_T = Tw;
                const int t0 = t - Tw;
                const detail::Plan wplan = detail::plan_horizon(policy, wp, sc.targets.slice(t0, Tw + 1), lat, t0);
                beta = detail::replay_window(wplan, wp, lat, y[static_cast<std::size_t>(t0)], t0, N);
            }
        }
        if (policy == Policy::Greedy)
            for (int n = 0; n < N; ++n)
                beta[static_cast<std::size_t>(n)] =
                    detail::greedy_action(base, sc.ridge, lat, n, residuals[static_cast<std::size_t>(n)], t);

        if (sc.deviation) {
            const auto& d = *sc.deviation;
            if (d.agent < 0 || d.agent >= N) throw RangeError("deviation agent out of range");
            if (static_cast<std::size_t>(t) < d.offsets.size())
                beta[static_cast<std::size_t>(d.agent)] += d.offsets[static_cast<std::size_t>(t)];
        }

        for (int n = 0; n < N; ++n) pool.latents[static_cast<std::size_t>(n)] = lat.realized(n, t);
        const Vec mean_before = pool.mean();
        AgentPool next;
        try {
            next = step_dynamics(pool, beta, base);
        } catch (const DynamicsError& e) {
            throw DynamicsError(std::string(e.what()) + " at t=" + std::to_string(t));
        }

        const Vec& target = y[static_cast<std::size_t>(t + 1)];
        for (int n = 0; n < N; ++n) {
            const auto i = static_cast<std::size_t>(n);
            residuals[i].push_back(target - base.theta * pool.predictions[i] - base.theta_bar * mean_before);
            sq_err[i].push_back((target - next.predictions[i]).squaredNorm());
        }
        // Aggregation weights use errors observed up to time t only.
        std::vector<std::vector<double>> known(static_cast<std::size_t>(N));
        for (int n = 0; n < N; ++n) {
            const auto& e = sq_err[static_cast<std::size_t>(n)];
            known[static_cast<std::size_t>(n)].assign(e.begin(), e.end() - 1);
        }
        const Aggregate agg = aggregate_predictions(next.predictions, known, sc.aggregation.alpha_a,
                                                    sc.aggregation.window_Ta);

        st.target = target;
        st.pred_before = pool.predictions;
        st.actions = beta;
        st.pred_after = next.predictions;
        st.aggregate = agg.prediction;
        st.aggregate_weights = agg.weights;
        rec.stages.push_back(std::move(st));
        rec.messages += messages_per_step(policy, N);
        pool = std::move(next);

        if (sc.mode == Mode::Forecast && spawn_state && (t + 1) % sc.spawner.every == 0 && t + 1 < steps)
            spawn(t + 1);
    }

    detail::finalize_metrics(rec, base);
    rec.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return rec;
}

}  // namespace mfnash
