// Per-agent greedy ridge-regression baseline.
//
// At time t the agent solves
//     min_beta  sum_{s=(t-T) v 0}^{t-1} e^{-alpha (t-1-s)} ||r_s - Z_s beta||^2 + gamma ||beta||^2
// with residual targets r_s = y_{s+1} - theta Y^n_s - theta_bar Y^(N)_s. Rows are
// scaled by e^{-alpha (t-1-s)/2}, which makes the stacked least-squares
// objective identical to the weighted one.

#pragma once

#include "mfnash/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mfnash {

struct RidgeConfig {
    int window_T{10};
    double alpha{0.0};
    double gamma{1.0};

    void validate() const {
        if (window_T < 1) throw ParamError("ridge: window_T must be at least 1");
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParamError("ridge: alpha must be finite and nonnegative");
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParamError("ridge: gamma must be finite and positive");
    }
};

/// One (Z_s, r_s) pair of the agent's history.
struct RidgeSample {
    Mat Z;       ///< d_y x d_z latent at time s
    Vec residual;  ///< d_y target r_s
};

/// Stacked weighted design X and response ybar of the most recent window.
struct RidgeSystem {
    Mat X;
    Vec y;
};

/// Builds the row-weighted system from a chronological history whose last
/// element is time t-1; only the last window_T samples are used.
inline RidgeSystem ridge_system(const std::vector<RidgeSample>& history, const RidgeConfig& cfg) {
    cfg.validate();
    if (history.empty()) throw RangeError("ridge: empty history window");
    const auto total = history.size();
    const auto used = std::min<std::size_t>(total, static_cast<std::size_t>(cfg.window_T));
    const auto dy = history.back().Z.rows();
    const auto dz = history.back().Z.cols();
    RidgeSystem sys;
    sys.X.resize(static_cast<Eigen::Index>(used) * dy, dz);
    sys.y.resize(static_cast<Eigen::Index>(used) * dy);
    for (std::size_t k = 0; k < used; ++k) {
        const auto& s = history[total - used + k];
        if (s.Z.rows() != dy || s.Z.cols() != dz || s.residual.size() != dy)
            throw RangeError("ridge: inconsistent sample shapes in history");
        const double age = static_cast<double>(used - 1 - k);
        const double w = std::exp(-0.5 * cfg.alpha * age);
        const auto row = static_cast<Eigen::Index>(k) * dy;
        sys.X.middleRows(row, dy) = w * s.Z;
        sys.y.segment(row, dy) = w * s.residual;
    }
    return sys;
}

/// beta = (X^T X + gamma I)^{-1} X^T ybar for the discounted window.
inline Vec ridge_action(const std::vector<RidgeSample>& history, const RidgeConfig& cfg) {
    const RidgeSystem sys = ridge_system(history, cfg);
    const auto dz = sys.X.cols();
    const Mat normal = sys.X.transpose() * sys.X + cfg.gamma * Mat::Identity(dz, dz);
    return normal.llt().solve(sys.X.transpose() * sys.y);
}

}  // namespace mfnash
