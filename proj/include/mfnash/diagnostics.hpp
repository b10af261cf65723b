// Finite-N versus mean-field convergence diagnostics.
//
// For each N on a grid the diagnostic reports
//   lambda_gap     max_t max_i ||Lambda^N_i(t) - Lambda_i(t)||_F, where the
//                  reduced blocks are rescaled as Lambda^N_1 = Pi1,
//                  Lambda^N_2 = N Pi2, Lambda^N_3 = N^2 Pi3, Lambda^N_4 = N^2 Pi4;
//   meanfield_gap  Monte-Carlo mean of ||Y^(N)_T - Ybar_T|| under the reduced
//                  centralized policy, with its standard error.

#pragma once

#include "mfnash/core.hpp"
#include "mfnash/model.hpp"
#include "mfnash/nash_decentralized.hpp"
#include "mfnash/nash_reduced.hpp"
#include "mfnash/random.hpp"
#include "mfnash/sim.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mfnash {

struct ConvergenceConfig {
    GameParams params;            ///< population_N is ignored; horizon_T sets the episode length
    TargetSeries targets;         ///< T + 1 targets
    std::vector<Mat> support;     ///< discrete latent support (uniform)
    std::vector<int> n_grid{4, 16, 64, 256};
    int paths{100};
    std::uint64_t seed{0};
};

struct GapRow {
    int N{0};
    double lambda_gap{0.0};
    double meanfield_gap{0.0};
    double stderr_gap{0.0};
    bool monotone{true};  ///< within two standard errors of the previous row
};

struct GapReport {
    std::vector<GapRow> rows;
    bool meanfield_non_increasing{true};
    bool lambda_strictly_decreasing{true};
};

/// next - prev <= 2 sqrt(se_prev^2 + se_next^2).
inline bool non_increasing_within_2se(double prev_mean, double prev_se, double next_mean, double next_se) {
    return next_mean - prev_mean <= 2.0 * std::sqrt(prev_se * prev_se + next_se * next_se);
}

/// Fills GapRow::monotone (the first row is always true) and the summary flags.
inline void flag_monotone(GapReport& report) {
    report.meanfield_non_increasing = true;
    report.lambda_strictly_decreasing = true;
    for (std::size_t k = 0; k < report.rows.size(); ++k) {
        auto& r = report.rows[k];
        if (k == 0) {
            r.monotone = true;
            continue;
        }
        const auto& prev = report.rows[k - 1];
        r.monotone = non_increasing_within_2se(prev.meanfield_gap, prev.stderr_gap, r.meanfield_gap, r.stderr_gap);
        report.meanfield_non_increasing = report.meanfield_non_increasing && r.monotone;
        report.lambda_strictly_decreasing = report.lambda_strictly_decreasing && r.lambda_gap < prev.lambda_gap;
    }
}

/// max_t max_i ||Lambda^N_i - Lambda_i||_F.
inline double lambda_gap(const ReducedCoeffs& red, const DecentralizedCoeffs& dec) {
    const double N = red.N;
    double gap = 0.0;
    for (std::size_t t = 0; t < red.Pi1.size(); ++t) {
        gap = std::max(gap, (red.Pi1[t] - dec.L1[t]).norm());
        gap = std::max(gap, (N * red.Pi2[t] - dec.L2[t]).norm());
        gap = std::max(gap, (N * N * red.Pi3[t] - dec.L3[t]).norm());
        gap = std::max(gap, (N * N * red.Pi4[t] - dec.L4[t]).norm());
    }
    return gap;
}

inline GapReport limit_gap_diagnostic(const ConvergenceConfig& cfg) {
    if (cfg.paths < 2) throw ParamError("convergence: need at least two Monte-Carlo paths");
    if (cfg.n_grid.empty()) throw ParamError("convergence: empty N grid");
    GameParams p = cfg.params;
    p.population_N = 1;
    p.validate();
    const MomentSet mom = [&] {
        SampleBank bank;
        bank.dim_y = p.dim_y;
        bank.dim_z = p.dim_z;
        bank.samples.assign(static_cast<std::size_t>(p.horizon_T), cfg.support);
        return estimate_moments(bank);
    }();
    const DecentralizedCoeffs dec = decentralized_backward_pass(p, mom, cfg.targets);
    const Vec ybar_T = meanfield_forward(dec, p, mom, cfg.targets.values.front()).ybar.back();

    GapReport report;
    for (int N : cfg.n_grid) {
        if (N < 1) throw ParamError("convergence: grid entries must be positive");
        GameParams pn = p;
        pn.population_N = N;
        GapRow row;
        row.N = N;
        row.lambda_gap = lambda_gap(reduced_backward_pass(pn, mom, cfg.targets), dec);

        Scenario sc;
        sc.params = pn;
        sc.targets = cfg.targets;
        sc.latent.kind = LatentKind::Discrete;
        sc.latent.support = cfg.support;
        sc.mode = Mode::Game;
        sc.steps = p.horizon_T;
        double sum = 0.0, sum_sq = 0.0;
        for (int path = 0; path < cfg.paths; ++path) {
            const std::uint64_t s = splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(path)));
            const RunRecord rec = run_episode(Policy::Reduced, sc, s);
            Vec mean = Vec::Zero(p.dim_y);
            for (const auto& y : rec.stages.back().pred_after) mean += y;
            mean /= static_cast<double>(N);
            const double g = (mean - ybar_T).norm();
            sum += g;
            sum_sq += g * g;
        }
        const double n = cfg.paths;
        row.meanfield_gap = sum / n;
        const double var = std::max(0.0, (sum_sq - n * row.meanfield_gap * row.meanfield_gap) / (n - 1.0));
        row.stderr_gap = std::sqrt(var / n);
        report.rows.push_back(row);
    }
    flag_monotone(report);
    return report;
}

/// Scalar scenario with two-point latents used by the convergence command and tests.
inline ConvergenceConfig default_convergence_config() {
    ConvergenceConfig cfg;
    cfg.params = GameParams::scalar(1, 1, 0.6, 0.3);
    cfg.params.kappa = 1.0;
    cfg.params.kappa_bar = 0.5;
    cfg.params.gamma = 0.5;
    cfg.params.alpha = 0.1;
    cfg.params.horizon_T = 8;
    for (int t = 0; t <= cfg.params.horizon_T; ++t)
        cfg.targets.values.push_back(Vec::Constant(1, t % 2 == 0 ? 0.9 : -0.9));
    cfg.targets.provenance = "periodic";
    cfg.support = {Mat::Constant(1, 1, 0.5), Mat::Constant(1, 1, 1.5)};
    cfg.seed = 7;
    return cfg;
}

}  // namespace mfnash
