#include "cli/commands.hpp"

#include "cli/config.hpp"
#include "mfnash/verify.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <variant>

namespace mfnash::cli {

namespace fs = std::filesystem;

namespace {

struct Cell {
    Policy policy;
    int N;
    std::uint64_t seed;

    [[nodiscard]] std::string name() const { return fmt::format("{}_N{}_seed{}", to_string(policy), N, seed); }
    [[nodiscard]] std::string label() const { return fmt::format("policy={} N={} seed={}", to_string(policy), N, seed); }
};

/// Configuration plus the raw document it came from.
struct Loaded {
    ExperimentConfig cfg;
    Json doc;
};

Loaded load(const CliOptions& opts) {
    if (opts.config_path.empty()) throw ConfigError("--config is required");
    Loaded l;
    std::ifstream in(opts.config_path);
    if (!in) throw ConfigError("cannot read config '" + opts.config_path + "'");
    try {
        l.doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("invalid JSON in '" + opts.config_path + "': " + e.what());
    }
    l.cfg = parse_config(l.doc);
    if (opts.out_dir) l.cfg.output_dir = *opts.out_dir;
    if (opts.seed_override) {
        l.cfg.seeds = {*opts.seed_override};
        l.cfg.convergence.seed = *opts.seed_override;
    }
    return l;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    try {
        return generate_dataset(cfg.dataset);
    } catch (const Error& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
    }
}

std::string num(double x) { return std::isfinite(x) ? fmt::format("{}", x) : std::string("nan"); }

/// Coefficients planned over the first horizon of a cell.
Json cell_coefficients(const Cell& cell, const Scenario& sc, const RunRecord& rec) {
    Json out{{"schema_version", "1"}, {"policy", to_string(cell.policy)}, {"N", cell.N}, {"seed", cell.seed},
             {"window", "first planning horizon"}, {"params", params_json(sc.params)}};
    if (cell.policy == Policy::Greedy) {
        Json finals = Json::array();
        for (const auto& b : rec.stages.back().actions) finals.push_back(vector_json(b));
        out["ridge"] = Json{{"window_T", sc.ridge.window_T}, {"alpha", sc.ridge.alpha}, {"gamma", sc.ridge.gamma}};
        out["final_actions"] = std::move(finals);
        return out;
    }
    GameParams p = sc.params;
    p.horizon_T = std::min(p.horizon_T, sc.resolved_steps());
    LatentProcess lat(sc.latent, p.dim_y, p.dim_z, p.population_N, cell.seed,
                      sc.features.empty() ? nullptr : &sc.features);
    const auto plan = detail::plan_horizon(cell.policy, p, sc.targets.slice(0, p.horizon_T + 1), lat, 0);
    switch (cell.policy) {
        case Policy::Full: out["coefficients"] = coeffs_json(plan.full); break;
        case Policy::Reduced: out["coefficients"] = coeffs_json(plan.reduced); break;
        case Policy::Decentralized: {
            Json per = Json::array();
            for (const auto& c : plan.dec) per.push_back(coeffs_json(c));
            out["coefficients"] = std::move(per);
            break;
        }
        case Policy::Greedy: break;
    }
    return out;
}

bool is_config_error(const std::exception& e) {
    return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParamError*>(&e) ||
           dynamic_cast<const SpecError*>(&e) || dynamic_cast<const DataError*>(&e);
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw DataError("cannot create directory '" + p.string() + "': " + ec.message());
}

}  // namespace

int cmd_run(const CliOptions& opts) {
    Loaded l;
    Dataset data;
    std::vector<Cell> cells;
    std::vector<Scenario> scenarios;
    try {
        l = load(opts);
        data = load_dataset(l.cfg);
        for (Policy pol : l.cfg.policies)
            for (int N : l.cfg.n_grid)
                for (auto seed : l.cfg.seeds) cells.push_back({pol, N, seed});
        for (int N : l.cfg.n_grid) {
            Scenario sc = make_scenario(l.cfg, data, N);
            if (sc.resolved_steps() < 1) throw ConfigError("the dataset leaves no steps to simulate");
            scenarios.push_back(std::move(sc));
        }
    } catch (const std::exception& e) {
        spdlog::error("config error: {}", e.what());
        return kExitConfig;
    }

    if (opts.dry_run) {
        fmt::print("{} cells ({} mode, {} steps)\n", cells.size(), to_string(l.cfg.mode), scenarios.front().resolved_steps());
        for (const auto& c : cells) fmt::print("  {}\n", c.label());
        return kExitOk;
    }

    auto scenario_for = [&](int N) -> const Scenario& {
        const auto it = std::find(l.cfg.n_grid.begin(), l.cfg.n_grid.end(), N);
        return scenarios[static_cast<std::size_t>(it - l.cfg.n_grid.begin())];
    };

    std::vector<std::variant<std::monostate, RunRecord, std::string>> results(cells.size());
    std::vector<bool> config_failure(cells.size(), false);
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const Cell& c = cells[i];
            try {
                results[i] = run_episode(c.policy, scenario_for(c.N), c.seed);
                std::lock_guard lock(log_mutex);
                spdlog::info("finished {}", c.label());
            } catch (const std::exception& e) {
                results[i] = std::string(e.what());
                config_failure[i] = is_config_error(e);
            }
        }
    };
    const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(cells.size())));
    std::vector<std::thread> pool;
    for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < cells.size(); ++i)
        if (const auto* msg = std::get_if<std::string>(&results[i])) {
            const bool cfg_err = config_failure[i];
            spdlog::error("{} failed in cell {}: {}", cfg_err ? "configuration" : "solver", cells[i].label(), *msg);
            return cfg_err ? kExitConfig : kExitSolver;
        }

    try {
        const fs::path out = l.cfg.output_dir;
        ensure_dir(out);
        if (l.cfg.dump_coeffs) ensure_dir(out / "coeffs");
        if (l.cfg.write_runs) ensure_dir(out / "runs");

        std::ofstream csv(out / "results.csv");
        if (!csv) throw DataError("cannot write results.csv");
        csv << "policy,N,seed,rmse_agg,rmse_worst,regret,runtime_ms\n";
        Json cells_json = Json::array();
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const Cell& c = cells[i];
            const auto& rec = std::get<RunRecord>(results[i]);
            csv << fmt::format("{},{},{},{},{},{},{}\n", to_string(c.policy), c.N, c.seed, num(rec.rmse_agg),
                               num(rec.rmse_worst), num(rec.regret), l.cfg.timing ? num(rec.runtime_ms) : "");
            cells_json.push_back(run_summary_json(rec));
            if (l.cfg.dump_coeffs)
                write_json((out / "coeffs" / (c.name() + ".json")).string(),
                           cell_coefficients(c, scenario_for(c.N), rec));
            if (l.cfg.write_runs) {
                write_run_csv((out / "runs" / (c.name() + ".csv")).string(), rec);
                if (!rec.spawn_events.empty())
                    write_spawn_log((out / "runs" / (c.name() + "_spawner.jsonl")).string(), rec.spawn_events);
            }
        }

        // Monte-Carlo means over seeds per (policy, N).
        Json summary = Json::array();
        for (Policy pol : l.cfg.policies)
            for (int N : l.cfg.n_grid) {
                std::vector<double> regrets, worst, agg;
                for (std::size_t i = 0; i < cells.size(); ++i)
                    if (cells[i].policy == pol && cells[i].N == N) {
                        const auto& rec = std::get<RunRecord>(results[i]);
                        regrets.push_back(rec.regret);
                        worst.push_back(rec.rmse_worst);
                        agg.push_back(rec.rmse_agg);
                    }
                auto mean = [](const std::vector<double>& xs) {
                    double s = 0.0;
                    for (double x : xs) s += x;
                    return s / static_cast<double>(xs.size());
                };
                auto se = [&](const std::vector<double>& xs) {
                    if (xs.size() < 2) return 0.0;
                    const double m = mean(xs);
                    double v = 0.0;
                    for (double x : xs) v += (x - m) * (x - m);
                    return std::sqrt(v / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
                };
                summary.push_back(Json{{"policy", to_string(pol)},
                                       {"N", N},
                                       {"seeds", regrets.size()},
                                       {"regret_mean", mean(regrets)},
                                       {"regret_stderr", se(regrets)},
                                       {"rmse_worst_mean", mean(worst)},
                                       {"rmse_agg_mean", mean(agg)},
                                       {"messages_per_step", messages_per_step(pol, N)}});
            }

        write_json((out / "report.json").string(), Json{{"schema_version", "1"},
                                                        {"command", "run"},
                                                        {"mode", to_string(l.cfg.mode)},
                                                        {"dataset", data.targets.provenance},
                                                        {"config", l.doc},
                                                        {"cells", std::move(cells_json)},
                                                        {"monte_carlo_means", std::move(summary)}});
        spdlog::info("wrote {} cells to {}", cells.size(), out.string());
    } catch (const std::exception& e) {
        spdlog::error("output error: {}", e.what());
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_convergence(const CliOptions& opts) {
    Loaded l;
    ConvergenceConfig conv;
    try {
        l = load(opts);
        const Dataset data = load_dataset(l.cfg);
        conv = make_convergence(l.cfg, data);
    } catch (const std::exception& e) {
        spdlog::error("config error: {}", e.what());
        return kExitConfig;
    }
    if (opts.dry_run) {
        fmt::print("convergence grid ({} paths each, T={})\n", conv.paths, conv.params.horizon_T);
        for (int N : conv.n_grid) fmt::print("  N={}\n", N);
        return kExitOk;
    }
    GapReport rep;
    try {
        rep = limit_gap_diagnostic(conv);
    } catch (const std::exception& e) {
        spdlog::error("solver failure in convergence diagnostic: {}", e.what());
        return is_config_error(e) ? kExitConfig : kExitSolver;
    }
    try {
        const fs::path out = l.cfg.output_dir;
        ensure_dir(out);
        std::ofstream csv(out / "convergence.csv");
        if (!csv) throw DataError("cannot write convergence.csv");
        csv << "N,lambda_gap,meanfield_gap,stderr,monotone_2se\n";
        Json rows = Json::array();
        for (const auto& r : rep.rows) {
            csv << fmt::format("{},{},{},{},{}\n", r.N, num(r.lambda_gap), num(r.meanfield_gap), num(r.stderr_gap),
                               r.monotone ? 1 : 0);
            rows.push_back(Json{{"N", r.N},
                                {"lambda_gap", number_json(r.lambda_gap)},
                                {"meanfield_gap", number_json(r.meanfield_gap)},
                                {"stderr", number_json(r.stderr_gap)},
                                {"monotone_2se", r.monotone}});
        }
        write_json((out / "report.json").string(),
                   Json{{"schema_version", "1"},
                        {"command", "convergence"},
                        {"paths", conv.paths},
                        {"seed", conv.seed},
                        {"rows", std::move(rows)},
                        {"meanfield_non_increasing", rep.meanfield_non_increasing},
                        {"lambda_strictly_decreasing", rep.lambda_strictly_decreasing},
                        {"config", l.doc}});
        spdlog::info("wrote {} rows to {}", rep.rows.size(), (out / "convergence.csv").string());
    } catch (const std::exception& e) {
        spdlog::error("output error: {}", e.what());
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_verify(const CliOptions& opts) {
    std::vector<SuiteResult> suites;
    try {
        suites.push_back(verify_structure_suite());
        suites.push_back(verify_qp_suite());
        suites.push_back(verify_convergence_suite());
    } catch (const std::exception& e) {
        spdlog::error("verify suite aborted: {}", e.what());
        return kExitSolver;
    }
    bool all = true;
    Json report = Json::array();
    fmt::print("{:<12} {:<44} {:>12} {:>10}  {}\n", "suite", "check", "value", "tolerance", "result");
    for (const auto& s : suites) {
        for (const auto& c : s.checks) {
            fmt::print("{:<12} {:<44} {:>12.3e} {:>10.1e}  {}\n", s.name, c.name, c.value, c.tolerance,
                       c.pass ? "PASS" : "FAIL");
            report.push_back(Json{{"suite", s.name}, {"check", c.name}, {"value", c.value},
                                  {"tolerance", c.tolerance}, {"pass", c.pass}});
        }
        fmt::print("{:<12} {}\n", s.name, s.pass() ? "PASS" : "FAIL");
        all = all && s.pass();
    }
    if (opts.out_dir) {
        try {
            ensure_dir(*opts.out_dir);
            write_json((fs::path(*opts.out_dir) / "verify.json").string(),
                       Json{{"schema_version", "1"}, {"command", "verify"}, {"checks", std::move(report)}, {"pass", all}});
        } catch (const std::exception& e) {
            spdlog::error("output error: {}", e.what());
            return kExitFailure;
        }
    }
    return all ? kExitOk : kExitFailure;
}

}  // namespace mfnash::cli
