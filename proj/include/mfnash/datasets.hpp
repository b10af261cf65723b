// Synthetic target series and CSV ingestion.
//
// A Dataset pairs each target y_i with the feature vector x_i used to
// predict it. For the lag-based series the feature is the previous target,
// x_i = y_{i-1}; for concept drift it is the analytic input [k, k, sqrt k].

#pragma once

#include "mfnash/core.hpp"
#include "mfnash/model.hpp"
#include "mfnash/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mfnash {

enum class DatasetKind { Periodic, LogisticMap, ConceptDrift, Csv };

inline DatasetKind parse_dataset_kind(const std::string& name) {
    if (name == "periodic") return DatasetKind::Periodic;
    if (name == "logistic_map") return DatasetKind::LogisticMap;
    if (name == "concept_drift") return DatasetKind::ConceptDrift;
    if (name == "csv") return DatasetKind::Csv;
    throw SpecError("unknown dataset kind '" + name + "'");
}

inline std::string to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::Periodic: return "periodic";
        case DatasetKind::LogisticMap: return "logistic_map";
        case DatasetKind::ConceptDrift: return "concept_drift";
        case DatasetKind::Csv: return "csv";
    }
    return "unknown";
}

struct DatasetSpec {
    DatasetKind kind{DatasetKind::Periodic};
    int length{200};
    std::uint64_t seed{0};
    /// Generator parameters: "amplitude" (periodic), "c" and "x0" (logistic map).
    std::map<std::string, double> parameters;
    std::string csv_path;
    std::vector<std::string> target_columns;
    int lag{1};
    bool max_scale{false};  ///< divide targets and features by their max absolute value
};

/// Targets with aligned features: features[i] is the input used to predict targets[i].
struct Dataset {
    TargetSeries targets;
    std::vector<Vec> features;

    [[nodiscard]] int dim_x() const { return features.empty() ? 0 : static_cast<int>(features.front().size()); }
};

/// Blend weight between the two concept-drift regimes.
inline double concept_drift_blend(double x) {
    constexpr double lo = 7.0 * std::numbers::pi / 8.0;
    constexpr double hi = 9.0 * std::numbers::pi / 8.0;
    if (x < lo) return 1.0;
    if (x > hi) return 0.0;
    return std::cos(2.0 * (x - lo));
}

/// Analytic input [k, k, sqrt k] of the concept-drift series.
inline Vec concept_drift_input(double k) {
    Vec x(3);
    x << k, k, std::sqrt(k);
    return x;
}

/// Two-dimensional concept-drift target at input x.
inline Vec concept_drift_value(const Vec& x) {
    const double x1 = x(0), x2 = x(1), x3 = x(2);
    const double y11 = x1 * x1 + std::sin(x2) + x1 * x3 + 0.5 * std::cos(10.0 * x1);
    const double y21 = x1 * std::cos(x2) + x3 - std::exp(-x2);
    const double y12 = x1 + x2 - std::sin(x3);
    const double y22 = std::cos(x1) * std::sin(x2) + x3 * x3 + 0.25 * std::cos(10.0 * x1);
    const double a = concept_drift_blend(x1);
    Vec y(2);
    y << a * y11 + (1.0 - a) * y12, a * y21 + (1.0 - a) * y22;
    return y;
}

/// CSV reader returning (targets, lagged features).
inline std::pair<TargetSeries, std::vector<Vec>> load_csv(const std::string& path,
                                                          const std::vector<std::string>& target_columns,
                                                          int lag);

namespace detail {

inline double param_or(const DatasetSpec& s, const std::string& key, double fallback) {
    const auto it = s.parameters.find(key);
    return it == s.parameters.end() ? fallback : it->second;
}

/// Builds (y_i, x_i = [y_{i-1}, ..., y_{i-lag}]) pairs from a raw sequence.
inline Dataset lagged(const std::vector<Vec>& raw, int lag, const std::string& provenance) {
    if (lag < 1) throw SpecError("lag must be at least 1");
    if (static_cast<int>(raw.size()) < lag + 2) throw DataError("series too short for the requested lag");
    Dataset d;
    d.targets.provenance = provenance;
    const auto dy = raw.front().size();
    for (std::size_t i = static_cast<std::size_t>(lag); i < raw.size(); ++i) {
        Vec x(dy * lag);
        for (int l = 0; l < lag; ++l) x.segment(l * dy, dy) = raw[i - 1 - static_cast<std::size_t>(l)];
        d.targets.values.push_back(raw[i]);
        d.features.push_back(x);
    }
    return d;
}

inline void scale_by_max(Dataset& d) {
    double m = 0.0;
    for (const auto& v : d.targets.values) m = std::max(m, max_abs(v));
    for (const auto& v : d.features) m = std::max(m, max_abs(v));
    if (m <= 0.0) return;
    for (auto& v : d.targets.values) v /= m;
    for (auto& v : d.features) v /= m;
}

}  // namespace detail

/// Deterministic dataset for a spec; CSV specs read the file.
inline Dataset generate_dataset(const DatasetSpec& spec) {
    if (spec.length < 2) throw SpecError("dataset length must be at least 2");
    const std::string tag = to_string(spec.kind) + "(seed=" + std::to_string(spec.seed) + ")";
    Dataset d;
    switch (spec.kind) {
        case DatasetKind::Periodic: {
            const double amp = detail::param_or(spec, "amplitude", 0.9);
            std::vector<Vec> raw;
            for (int i = 0; i <= spec.length; ++i)
                raw.push_back(Vec::Constant(1, (i % 2 == 0 ? -amp : amp)));
            d = detail::lagged(raw, 1, tag);
            break;
        }
        case DatasetKind::LogisticMap: {
            const double c = detail::param_or(spec, "c", 3.6);
            double x = detail::param_or(spec, "x0", -1.0);
            if (x < 0.0) {
                auto rng = make_rng(spec.seed, 0, 0, Stream::Dataset);
                x = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
            }
            std::vector<Vec> raw;
            for (int i = 0; i <= spec.length; ++i) {
                raw.push_back(Vec::Constant(1, x));
                x = c * x * (1.0 - x);
            }
            d = detail::lagged(raw, 1, tag);
            break;
        }
        case DatasetKind::ConceptDrift: {
            auto rng = make_rng(spec.seed, 0, 0, Stream::Dataset);
            std::uniform_real_distribution<double> unif(0.0, 2.0 * std::numbers::pi);
            std::vector<double> ks(static_cast<std::size_t>(spec.length));
            for (auto& k : ks) k = unif(rng);
            std::sort(ks.begin(), ks.end());
            d.targets.provenance = tag;
            for (double k : ks) {
                const Vec x = concept_drift_input(k);
                d.features.push_back(x);
                d.targets.values.push_back(concept_drift_value(x));
            }
            break;
        }
        case DatasetKind::Csv: {
            auto [targets, features] = load_csv(spec.csv_path, spec.target_columns, spec.lag);
            d.targets = std::move(targets);
            d.features = std::move(features);
            break;
        }
    }
    if (spec.max_scale) detail::scale_by_max(d);
    return d;
}

/// Target series of a spec (see generate_dataset).
inline TargetSeries generate_series(const DatasetSpec& spec) { return generate_dataset(spec).targets; }

/// Writes a header row and numeric rows at full double precision.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    }
}

inline std::pair<TargetSeries, std::vector<Vec>> load_csv(const std::string& path,
                                                          const std::vector<std::string>& target_columns,
                                                          int lag) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw DataError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    std::vector<std::size_t> cols;
    const auto wanted = target_columns.empty() ? std::vector<std::string>{header.front()} : target_columns;
    for (const auto& name : wanted) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("column '" + name + "' not found in '" + path + "'");
        cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    std::vector<Vec> raw;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        Vec v(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (cols[j] >= cells.size()) throw DataError("row " + std::to_string(row) + " is missing columns");
            std::size_t used = 0;
            double value = 0.0;
            try {
                value = std::stod(cells[cols[j]], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != cells[cols[j]].size() || !std::isfinite(value))
                throw DataError("non-numeric cell '" + cells[cols[j]] + "' at row " + std::to_string(row));
            v(static_cast<Eigen::Index>(j)) = value;
        }
        raw.push_back(v);
    }
    if (raw.empty()) throw DataError("'" + path + "' has no data rows");
    Dataset d = detail::lagged(raw, lag, path);
    return {d.targets, d.features};
}

}  // namespace mfnash
