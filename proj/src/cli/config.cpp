#include "cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mfnash::cli {

namespace {

/// Object reader that records which keys were consumed and rejects the rest.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
    }

    [[nodiscard]] const Json* find(const std::string& key) {
        used_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        const Json* v = find(key);
        if (!v) return fallback;
        try {
            return v->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("'" + where(key) + "' has the wrong type");
        }
    }

    [[nodiscard]] std::string where(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!used_.count(item.key())) throw ConfigError("unknown key '" + where(item.key()) + "'");
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

Mat parse_matrix(const Json& j, const std::string& where, Eigen::Index rows, Eigen::Index cols, bool scalar_is_identity) {
    if (j.is_number()) {
        const double s = j.get<double>();
        if (scalar_is_identity) {
            if (rows != cols) throw ConfigError("'" + where + "': scalar shorthand needs a square matrix");
            return s * Mat::Identity(rows, cols);
        }
        return Mat::Constant(rows, cols, s);
    }
    if (!j.is_array() || j.empty()) throw ConfigError("'" + where + "' must be a number or a list of rows");
    Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.front().is_array() ? j.front().size() : 0));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& row = j[i];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols())
            throw ConfigError("'" + where + "' rows must be equal-length lists");
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (!row[k].is_number()) throw ConfigError("'" + where + "' entries must be numbers");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
        }
    }
    if (m.rows() != rows || m.cols() != cols)
        throw ConfigError("'" + where + "' must be " + std::to_string(rows) + "x" + std::to_string(cols));
    return m;
}

std::vector<Mat> parse_matrix_list(const Json& j, const std::string& where, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array() || j.empty()) throw ConfigError("'" + where + "' must be a nonempty list");
    std::vector<Mat> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(parse_matrix(j[i], where + "[" + std::to_string(i) + "]", rows, cols, false));
    return out;
}

void parse_dataset(const Json& j, DatasetSpec& d) {
    Section s(j, "dataset");
    try {
        d.kind = parse_dataset_kind(s.get<std::string>("kind", "periodic"));
    } catch (const SpecError& e) {
        throw ConfigError(std::string("dataset.kind: ") + e.what());
    }
    d.length = s.get<int>("length", d.length);
    d.seed = s.get<std::uint64_t>("seed", d.seed);
    d.csv_path = s.get<std::string>("csv_path", "");
    d.target_columns = s.get<std::vector<std::string>>("target_columns", {});
    d.lag = s.get<int>("lag", 1);
    d.max_scale = s.get<bool>("max_scale", false);
    if (const Json* params = s.find("parameters")) {
        Section ps(*params, "dataset.parameters");
        std::vector<std::string> allowed;
        if (d.kind == DatasetKind::Periodic) allowed = {"amplitude"};
        if (d.kind == DatasetKind::LogisticMap) allowed = {"c", "x0"};
        for (const auto& key : allowed)
            if (const Json* v = ps.find(key)) {
                if (!v->is_number()) throw ConfigError("'dataset.parameters." + key + "' must be a number");
                d.parameters[key] = v->get<double>();
            }
        ps.finish();
    }
    s.finish();
    if (d.length < 2) throw ConfigError("dataset.length must be at least 2");
    if (d.kind == DatasetKind::Csv && d.csv_path.empty()) throw ConfigError("dataset.csv_path is required for csv");
    if (d.lag < 1) throw ConfigError("dataset.lag must be at least 1");
}

}  // namespace

ExperimentConfig parse_config(const Json& doc) {
    ExperimentConfig cfg;
    Section root(doc, "");

    if (const Json* j = root.find("dataset")) parse_dataset(*j, cfg.dataset);

    // The target dimension comes from the dataset; read it before shaping matrices.
    int dim_y = 1;
    if (cfg.dataset.kind == DatasetKind::ConceptDrift) dim_y = 2;
    if (cfg.dataset.kind == DatasetKind::Csv)
        dim_y = cfg.dataset.target_columns.empty() ? 1 : static_cast<int>(cfg.dataset.target_columns.size());

    {
        static const Json empty = Json::object();
        const Json* j = root.find("game");
        Section s(j ? *j : empty, "game");
        const int declared_dy = s.get<int>("dim_y", dim_y);
        if (declared_dy != dim_y)
            throw ConfigError("game.dim_y=" + std::to_string(declared_dy) + " but the dataset has dimension " +
                              std::to_string(dim_y));
        cfg.game.dim_y = dim_y;
        cfg.game.dim_z = s.get<int>("dim_z", 1);
        if (cfg.game.dim_z < 1) throw ConfigError("game.dim_z must be positive");
        const Json* th = s.find("theta");
        const Json* thb = s.find("theta_bar");
        cfg.game.theta = th ? parse_matrix(*th, "game.theta", dim_y, dim_y, true) : Mat::Zero(dim_y, dim_y);
        cfg.game.theta_bar = thb ? parse_matrix(*thb, "game.theta_bar", dim_y, dim_y, true) : Mat::Zero(dim_y, dim_y);
        cfg.game.kappa = s.get<double>("kappa", 1.0);
        cfg.game.kappa_bar = s.get<double>("kappa_bar", 0.0);
        cfg.game.gamma = s.get<double>("gamma", 1.0);
        cfg.game.alpha = s.get<double>("alpha", 0.0);
        cfg.game.horizon_T = s.get<int>("horizon_T", 10);
        cfg.game.population_N = 1;
        s.finish();
        try {
            cfg.game.validate();
        } catch (const ParamError& e) {
            throw ConfigError(std::string("game: ") + e.what());
        }
    }

    if (const Json* j = root.find("encoder")) {
        Section s(*j, "encoder");
        auto& e = cfg.encoder;
        try {
            e.kind = parse_latent_kind(s.get<std::string>("kind", "deterministic"));
            e.activation = parse_activation(s.get<std::string>("activation", "hard_sigmoid"));
        } catch (const Error& err) {
            throw ConfigError(std::string("encoder: ") + err.what());
        }
        const auto dy = cfg.game.dim_y, dz = cfg.game.dim_z;
        if (const Json* v = s.find("schedule")) e.schedule = parse_matrix_list(*v, "encoder.schedule", dy, dz);
        if (const Json* v = s.find("support")) e.support = parse_matrix_list(*v, "encoder.support", dy, dz);
        if (const Json* v = s.find("mean")) e.mean = parse_matrix(*v, "encoder.mean", dy, dz, false);
        e.stddev = s.get<double>("stddev", 0.0);
        e.encoder_sigma = s.get<double>("sigma", 0.1);
        e.recurrence_scale = s.get<double>("recurrence_scale", 0.9);
        e.mc_samples = s.get<int>("mc_samples", 64);
        s.finish();
        if (e.kind == LatentKind::Deterministic && e.schedule.empty()) e.schedule = {Mat::Constant(dy, dz, 1.0)};
        if (e.kind == LatentKind::Discrete && e.support.empty())
            throw ConfigError("encoder.support is required for discrete latents");
        if (e.kind == LatentKind::Gaussian && e.mean.size() == 0) e.mean = Mat::Constant(dy, dz, 1.0);
        if (e.mc_samples < 1) throw ConfigError("encoder.mc_samples must be positive");
        if (e.stddev < 0.0 || e.encoder_sigma < 0.0) throw ConfigError("encoder noise scales must be nonnegative");
    } else {
        cfg.encoder.schedule = {Mat::Constant(cfg.game.dim_y, cfg.game.dim_z, 1.0)};
    }

    try {
        cfg.mode = parse_mode(root.get<std::string>("mode", "game"));
        cfg.policies.clear();
        for (const auto& name : root.get<std::vector<std::string>>("policies", {"reduced"}))
            cfg.policies.push_back(parse_policy(name));
    } catch (const SpecError& e) {
        throw ConfigError(e.what());
    }
    if (cfg.policies.empty()) throw ConfigError("policies must be nonempty");
    cfg.steps = root.get<int>("steps", 0);
    if (cfg.steps < 0) throw ConfigError("steps must be nonnegative");
    cfg.n_grid = root.get<std::vector<int>>("n_grid", {4});
    if (cfg.n_grid.empty()) throw ConfigError("n_grid must be nonempty");
    for (int n : cfg.n_grid)
        if (n < 1) throw ConfigError("n_grid entries must be positive");
    cfg.seeds = root.get<std::vector<std::uint64_t>>("seeds", {0});
    if (cfg.seeds.empty()) throw ConfigError("seeds must be nonempty");

    if (const Json* j = root.find("aggregation")) {
        Section s(*j, "aggregation");
        cfg.aggregation.alpha_a = s.get<double>("alpha_a", cfg.aggregation.alpha_a);
        cfg.aggregation.window_Ta = s.get<int>("window_Ta", cfg.aggregation.window_Ta);
        s.finish();
        if (cfg.aggregation.window_Ta < 1 || cfg.aggregation.alpha_a < 0.0)
            throw ConfigError("aggregation needs window_Ta >= 1 and alpha_a >= 0");
    }
    if (const Json* j = root.find("greedy")) {
        Section s(*j, "greedy");
        cfg.greedy.window_T = s.get<int>("window_T", cfg.greedy.window_T);
        cfg.greedy.alpha = s.get<double>("alpha", cfg.greedy.alpha);
        cfg.greedy.gamma = s.get<double>("gamma", cfg.greedy.gamma);
        s.finish();
        try {
            cfg.greedy.validate();
        } catch (const ParamError& e) {
            throw ConfigError(std::string("greedy: ") + e.what());
        }
    }
    if (const Json* j = root.find("spawner")) {
        Section s(*j, "spawner");
        auto& sp = cfg.spawner;
        sp.enabled = s.get<bool>("enabled", true);
        sp.retire_K = s.get<int>("retire_K", sp.retire_K);
        sp.lambda_schedule = s.get<std::vector<double>>("lambda_schedule", sp.lambda_schedule);
        sp.sigma_schedule = s.get<std::vector<double>>("sigma_schedule", sp.sigma_schedule);
        sp.every = s.get<int>("every", sp.every);
        sp.orthogonalize = s.get<bool>("orthogonalize", sp.orthogonalize);
        sp.zeta1 = s.get<double>("zeta1", sp.zeta1);
        sp.zeta2 = s.get<double>("zeta2", sp.zeta2);
        s.finish();
        if (sp.enabled) {
            if (!cfg.encoder.is_encoder()) throw ConfigError("spawner requires an rfn or esn encoder");
            if (sp.every < 1) throw ConfigError("spawner.every must be positive");
            if (sp.lambda_schedule.empty() || sp.sigma_schedule.empty())
                throw ConfigError("spawner schedules must be nonempty");
            for (int n : cfg.n_grid)
                if (sp.retire_K < 1 || sp.retire_K >= n) throw ConfigError("spawner.retire_K must satisfy 1 <= K < N");
            if (sp.zeta1 < 0.0 || sp.zeta2 < 0.0) throw ConfigError("spawner zeta values must be nonnegative");
        }
    }
    if (const Json* j = root.find("convergence")) {
        Section s(*j, "convergence");
        auto& c = cfg.convergence;
        c.n_grid = s.get<std::vector<int>>("n_grid", c.n_grid);
        c.paths = s.get<int>("paths", c.paths);
        c.seed = s.get<std::uint64_t>("seed", c.seed);
        if (const Json* v = s.find("support"))
            c.support = parse_matrix_list(*v, "convergence.support", cfg.game.dim_y, cfg.game.dim_z);
        s.finish();
        if (c.n_grid.empty() || c.paths < 2) throw ConfigError("convergence needs a nonempty grid and paths >= 2");
    }
    cfg.output_dir = root.get<std::string>("output_dir", cfg.output_dir);
    cfg.dump_coeffs = root.get<bool>("dump_coeffs", cfg.dump_coeffs);
    cfg.write_runs = root.get<bool>("write_runs", cfg.write_runs);
    cfg.timing = root.get<bool>("timing", cfg.timing);
    root.finish();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("invalid JSON in '" + path + "': " + e.what());
    }
    return parse_config(doc);
}

Scenario make_scenario(const ExperimentConfig& cfg, const Dataset& data, int N) {
    Scenario sc;
    sc.params = cfg.game;
    sc.params.population_N = N;
    sc.params.dim_y = data.targets.dim();
    sc.targets = data.targets;
    sc.features = data.features;
    sc.latent = cfg.encoder;
    sc.mode = cfg.mode;
    sc.steps = cfg.steps;
    sc.aggregation = cfg.aggregation;
    sc.ridge = cfg.greedy;
    sc.spawner = cfg.spawner;
    return sc;
}

ConvergenceConfig make_convergence(const ExperimentConfig& cfg, const Dataset& data) {
    ConvergenceConfig c;
    c.params = cfg.game;
    const int T = c.params.horizon_T;
    if (data.targets.length() < T + 1) throw ConfigError("dataset is shorter than horizon_T + 1");
    c.targets = data.targets.slice(0, T + 1);
    c.support = cfg.convergence.support;
    if (c.support.empty())
        c.support = {Mat::Constant(c.params.dim_y, c.params.dim_z, 0.5), Mat::Constant(c.params.dim_y, c.params.dim_z, 1.5)};
    c.n_grid = cfg.convergence.n_grid;
    c.paths = cfg.convergence.paths;
    c.seed = cfg.convergence.seed;
    return c;
}

}  // namespace mfnash::cli
