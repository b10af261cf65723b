// Game parameters, target series and latent-moment estimation.
//
// The prediction of agent n evolves as
//     Y^n_{t+1} = theta Y^n_t + theta_bar Y^(N)_t + Z^n_t beta^n_t,
// and its cost is the discounted sum of a tracking term (kappa), a
// consensus term (kappa_bar) and a ridge penalty on the action (gamma).
// Every solver consumes the latent matrices Z only through the moments
//     m1(t) = E Z_t,  m2(t) = E Z_t^T Z_t,  m2_W(t) = E Z_t^T W Z_t,
// which are estimated from a stored bank of latent draws so that the
// weighted moment can be applied to any W.

#pragma once

#include "mfnash/core.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace mfnash {

/// Parameters of the N-agent linear-quadratic prediction game.
struct GameParams {
    Mat theta;          ///< d_y x d_y own-prediction persistence
    Mat theta_bar;      ///< d_y x d_y mean-prediction coupling
    double kappa{1.0};      ///< tracking weight
    double kappa_bar{0.0};  ///< consensus weight
    double gamma{1.0};      ///< ridge weight on actions
    double alpha{0.0};      ///< discount rate
    int horizon_T{1};
    int population_N{1};
    int dim_y{1};
    int dim_z{1};

    /// Throws ParamError when an invariant is violated.
    void validate() const {
        if (dim_y < 1 || dim_z < 1) throw ParamError("dim_y and dim_z must be positive");
        if (horizon_T < 1) throw ParamError("horizon_T must be positive");
        if (population_N < 1) throw ParamError("population_N must be positive");
        if (!(gamma > 0.0)) throw ParamError("gamma must be strictly positive");
        if (!(kappa >= 0.0) || !(kappa_bar >= 0.0) || !(alpha >= 0.0))
            throw ParamError("kappa, kappa_bar and alpha must be nonnegative");
        if (theta.rows() != dim_y || theta.cols() != dim_y)
            throw ParamError("theta must be dim_y x dim_y");
        if (theta_bar.rows() != dim_y || theta_bar.cols() != dim_y)
            throw ParamError("theta_bar must be dim_y x dim_y");
        if (!theta.allFinite() || !theta_bar.allFinite())
            throw ParamError("theta and theta_bar must be finite");
    }

    /// Discount weight exp(-alpha (T - 1 - t)) applied to stage t.
    [[nodiscard]] double discount(int t) const {
        return std::exp(-alpha * static_cast<double>(horizon_T - 1 - t));
    }

    /// Scalar-diagonal convenience constructor: theta = a I, theta_bar = b I.
    static GameParams scalar(int dim_y, int dim_z, double theta_scale, double theta_bar_scale) {
        GameParams p;
        p.dim_y = dim_y;
        p.dim_z = dim_z;
        p.theta = theta_scale * Mat::Identity(dim_y, dim_y);
        p.theta_bar = theta_bar_scale * Mat::Identity(dim_y, dim_y);
        return p;
    }
};

/// Observed targets y_0, ..., y_T.
struct TargetSeries {
    std::vector<Vec> values;
    std::string provenance;

    [[nodiscard]] int length() const { return static_cast<int>(values.size()); }
    [[nodiscard]] int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }

    /// Contiguous sub-series [start, start + count).
    [[nodiscard]] TargetSeries slice(int start, int count) const {
        if (start < 0 || count < 0 || start + count > length())
            throw RangeError("target slice out of range");
        TargetSeries out;
        out.values.assign(values.begin() + start, values.begin() + start + count);
        out.provenance = provenance + "[" + std::to_string(start) + ":" +
                         std::to_string(start + count) + "]";
        return out;
    }

    /// Throws ParamError unless there are exactly T + 1 finite d_y vectors.
    void validate_for(const GameParams& p) const {
        if (length() != p.horizon_T + 1)
            throw ParamError("target series must have horizon_T + 1 entries");
        for (const auto& v : values) {
            if (v.size() != p.dim_y) throw ParamError("target dimension differs from dim_y");
            if (!v.allFinite()) throw ParamError("target series contains non-finite values");
        }
    }
};

/// Monte-Carlo replicas of the latent matrix, one list per timestep.
struct SampleBank {
    int dim_y{1};
    int dim_z{1};
    std::vector<std::vector<Mat>> samples;  ///< samples[t][k] is d_y x d_z

    [[nodiscard]] int horizon() const { return static_cast<int>(samples.size()); }
};

class MomentSet;
inline MomentSet estimate_moments(const SampleBank& bank);

/// Per-timestep latent moments backed by the sample bank they came from.
class MomentSet {
public:
    MomentSet() = default;

    [[nodiscard]] int horizon() const { return static_cast<int>(m1_.size()); }
    [[nodiscard]] int dim_y() const { return dim_y_; }
    [[nodiscard]] int dim_z() const { return dim_z_; }

    [[nodiscard]] const Mat& m1(int t) const { return m1_.at(static_cast<std::size_t>(t)); }
    [[nodiscard]] const Mat& m2(int t) const { return m2_.at(static_cast<std::size_t>(t)); }

    /// Sample mean of Z^T W Z at time t.
    [[nodiscard]] Mat weighted_m2(int t, const Mat& W) const {
        const auto& bank = *draws_.at(static_cast<std::size_t>(t));
        return weighted_mean(bank, W);
    }

    /// Number of draws behind the moments at time t.
    [[nodiscard]] int count(int t) const {
        return static_cast<int>(draws_.at(static_cast<std::size_t>(t))->size());
    }

    /// Moments for timesteps [start, start + count).
    [[nodiscard]] MomentSet slice(int start, int count) const {
        if (start < 0 || count < 0 || start + count > horizon())
            throw RangeError("moment slice out of range");
        MomentSet out;
        out.dim_y_ = dim_y_;
        out.dim_z_ = dim_z_;
        for (int t = start; t < start + count; ++t) {
            const auto i = static_cast<std::size_t>(t);
            out.m1_.push_back(m1_[i]);
            out.m2_.push_back(m2_[i]);
            out.draws_.push_back(draws_[i]);
        }
        return out;
    }

    /// Throws ParamError unless the moment shapes match the game and cover T steps.
    void validate_for(const GameParams& p) const {
        if (dim_y_ != p.dim_y || dim_z_ != p.dim_z)
            throw ParamError("moment dimensions differ from the game parameters");
        if (horizon() < p.horizon_T) throw ParamError("moment set shorter than horizon_T");
    }

    friend MomentSet estimate_moments(const SampleBank& bank);

private:
    static Mat weighted_mean(const std::vector<Mat>& draws, const Mat& W) {
        const auto dz = draws.front().cols();
        Mat acc = Mat::Zero(dz, dz);
        for (const auto& z : draws) acc.noalias() += z.transpose() * (W * z);
        return acc / static_cast<double>(draws.size());
    }

    int dim_y_{0};
    int dim_z_{0};
    std::vector<Mat> m1_;
    std::vector<Mat> m2_;
    std::vector<std::shared_ptr<const std::vector<Mat>>> draws_;
};

/// Sample moments of a bank; m2 is evaluated through the weighted path with
/// W = I so that weighted_m2(t, I) reproduces it exactly.
inline MomentSet estimate_moments(const SampleBank& bank) {
    if (bank.samples.empty()) throw MomentError("sample bank has no timesteps");
    MomentSet out;
    out.dim_y_ = bank.dim_y;
    out.dim_z_ = bank.dim_z;
    const Mat eye = Mat::Identity(bank.dim_y, bank.dim_y);
    for (std::size_t t = 0; t < bank.samples.size(); ++t) {
        const auto& draws = bank.samples[t];
        if (draws.empty())
            throw MomentError("sample bank is empty at t=" + std::to_string(t));
        Mat mean = Mat::Zero(bank.dim_y, bank.dim_z);
        for (const auto& z : draws) {
            if (z.rows() != bank.dim_y || z.cols() != bank.dim_z)
                throw MomentError("sample shape mismatch at t=" + std::to_string(t));
            if (!z.allFinite())
                throw MomentError("non-finite sample at t=" + std::to_string(t));
            mean += z;
        }
        mean /= static_cast<double>(draws.size());
        out.m1_.push_back(mean);
        out.m2_.push_back(MomentSet::weighted_mean(draws, eye));
        out.draws_.push_back(std::make_shared<const std::vector<Mat>>(draws));
    }
    return out;
}

/// Moments of a degenerate (deterministic) latent schedule.
inline MomentSet exact_moments_deterministic(const std::vector<Mat>& z_schedule) {
    if (z_schedule.empty()) throw MomentError("latent schedule is empty");
    SampleBank bank;
    bank.dim_y = static_cast<int>(z_schedule.front().rows());
    bank.dim_z = static_cast<int>(z_schedule.front().cols());
    for (const auto& z : z_schedule) bank.samples.push_back({z});
    return estimate_moments(bank);
}

/// Concatenates the per-timestep draws of several banks of equal horizon.
inline SampleBank pool_banks(const std::vector<SampleBank>& banks) {
    if (banks.empty()) throw MomentError("no banks to pool");
    SampleBank out;
    out.dim_y = banks.front().dim_y;
    out.dim_z = banks.front().dim_z;
    out.samples.resize(static_cast<std::size_t>(banks.front().horizon()));
    for (const auto& b : banks) {
        if (b.horizon() != banks.front().horizon())
            throw MomentError("pooled banks must share a horizon");
        for (std::size_t t = 0; t < out.samples.size(); ++t)
            out.samples[t].insert(out.samples[t].end(), b.samples[t].begin(), b.samples[t].end());
    }
    return out;
}

}  // namespace mfnash
