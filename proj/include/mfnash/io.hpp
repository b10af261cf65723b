// JSON and CSV export of coefficients, run records and spawner events.
//
// Matrices are written as {"rows": r, "cols": c, "data": [...]} with data in
// row-major order. Non-finite numbers are written as null.

#pragma once

#include "mfnash/core.hpp"
#include "mfnash/diagnostics.hpp"
#include "mfnash/nash_decentralized.hpp"
#include "mfnash/nash_full.hpp"
#include "mfnash/nash_reduced.hpp"
#include "mfnash/sim.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>
#include <vector>

namespace mfnash {

using Json = nlohmann::ordered_json;

inline Json number_json(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json matrix_json(const Mat& m) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(number_json(m(i, j)));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Json vector_json(const Vec& v) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(number_json(v(i)));
    return data;
}

inline Mat matrix_from_json(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw SpecError("matrix data length mismatch");
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data.at(static_cast<std::size_t>(i * cols + k)).get<double>();
    return m;
}

template <class T, class F>
Json series_json(const std::vector<T>& xs, F&& f) {
    Json out = Json::array();
    for (const auto& x : xs) out.push_back(f(x));
    return out;
}

inline Json params_json(const GameParams& p) {
    return Json{{"theta", matrix_json(p.theta)},
                {"theta_bar", matrix_json(p.theta_bar)},
                {"kappa", p.kappa},
                {"kappa_bar", p.kappa_bar},
                {"gamma", p.gamma},
                {"alpha", p.alpha},
                {"horizon_T", p.horizon_T},
                {"population_N", p.population_N},
                {"dim_y", p.dim_y},
                {"dim_z", p.dim_z}};
}

inline Json coeffs_json(const FullNashCoeffs& c) {
    return Json{{"kind", "full"},
                {"N", c.N},
                {"T", c.T},
                {"dim_y", c.dim_y},
                {"dim_z", c.dim_z},
                {"G", series_json(c.G, matrix_json)},
                {"H", series_json(c.H, vector_json)},
                {"condition", c.condition}};
}

inline Json coeffs_json(const ReducedCoeffs& c) {
    return Json{{"kind", "reduced"},
                {"N", c.N},
                {"T", c.T},
                {"dim_y", c.dim_y},
                {"dim_z", c.dim_z},
                {"G1", series_json(c.G1N, matrix_json)},
                {"G2", series_json(c.G2N, matrix_json)},
                {"H", series_json(c.HN, vector_json)},
                {"Pi1", series_json(c.Pi1, matrix_json)},
                {"Pi2", series_json(c.Pi2, matrix_json)},
                {"Pi3", series_json(c.Pi3, matrix_json)},
                {"Pi4", series_json(c.Pi4, matrix_json)},
                {"Xi1", series_json(c.Xi1, vector_json)},
                {"Xi2", series_json(c.Xi2, vector_json)},
                {"inverse_residual", c.inverse_residual}};
}

inline Json coeffs_json(const DecentralizedCoeffs& c) {
    return Json{{"kind", "decentralized"},
                {"T", c.T},
                {"dim_y", c.dim_y},
                {"dim_z", c.dim_z},
                {"G1", series_json(c.G1, matrix_json)},
                {"G2", series_json(c.G2, matrix_json)},
                {"H", series_json(c.H, vector_json)},
                {"Lambda1", series_json(c.L1, matrix_json)},
                {"Lambda2", series_json(c.L2, matrix_json)},
                {"Lambda3", series_json(c.L3, matrix_json)},
                {"Lambda4", series_json(c.L4, matrix_json)},
                {"chi1", series_json(c.chi1, vector_json)},
                {"chi2", series_json(c.chi2, vector_json)},
                {"condition", c.condition}};
}

inline Json spawn_event_json(const SpawnEvent& e) {
    auto doubles = [](const std::vector<double>& xs) { return series_json(xs, number_json); };
    return Json{{"t", e.t},
                {"retired", e.retired},
                {"parents", e.parents},
                {"posterior", vector_json(e.posterior)},
                {"weights", vector_json(e.weights)},
                {"lambda_star", doubles(e.lambda_star)},
                {"kkt_residual", doubles(e.kkt_residual)},
                {"constraint_residual", doubles(e.constraint_residual)}};
}

/// Summary of a run; per-step detail goes to the CSV table.
inline Json run_summary_json(const RunRecord& r) {
    return Json{{"policy", to_string(r.policy)},
                {"mode", to_string(r.mode)},
                {"N", r.N},
                {"seed", r.seed},
                {"steps", r.stages.size()},
                {"cost_kind", "sample_path"},
                {"J", series_json(r.J, number_json)},
                {"regret", number_json(r.regret)},
                {"rmse_agg", number_json(r.rmse_agg)},
                {"rmse_worst", number_json(r.rmse_worst)},
                {"rmse_bottom20", number_json(r.rmse_bottom20)},
                {"rmse_agent", series_json(r.rmse_agent, number_json)},
                {"messages", r.messages},
                {"runtime_ms", r.runtime_ms},
                {"spawn_events", r.spawn_events.size()}};
}

inline void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

/// One line per spawner round.
inline void write_spawn_log(const std::string& path, const std::vector<SpawnEvent>& events) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    for (const auto& e : events) out << spawn_event_json(e).dump() << '\n';
}

/// Per-timestep table with one row per (t, agent, component) and the agent's cost terms.
inline void write_run_csv(const std::string& path, const RunRecord& r) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "t,round,agent,component,target,pred,aggregate,action_norm,tracking_cost,consensus_cost,action_cost,"
           "discount\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& st : r.stages) {
        const int N = static_cast<int>(st.pred_after.size());
        Vec mean = Vec::Zero(st.target.size());
        for (const auto& y : st.pred_after) mean += y;
        mean /= static_cast<double>(N);
        for (int n = 0; n < N; ++n) {
            const auto i = static_cast<std::size_t>(n);
            const double track = r.params.kappa * (st.target - st.pred_after[i]).squaredNorm();
            const double cons = r.params.kappa_bar * (st.pred_after[i] - mean).squaredNorm();
            const double act = r.params.gamma * st.actions[i].squaredNorm();
            for (Eigen::Index d = 0; d < st.target.size(); ++d)
                out << st.t << ',' << st.round << ',' << n << ',' << d << ',' << st.target(d) << ','
                    << st.pred_after[i](d) << ',' << st.aggregate(d) << ',' << st.actions[i].norm() << ',' << track
                    << ',' << cons << ',' << act << ',' << st.discount << '\n';
        }
    }
}

}  // namespace mfnash
