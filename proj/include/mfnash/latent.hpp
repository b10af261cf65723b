// Latent processes Z^n_t and their Monte-Carlo banks.
//
// Every latent is a pure function of (seed, agent stream, t). Realized
// latents drive the simulated dynamics; banks are independent replicas
// from which the solvers estimate moments. Discrete and deterministic
// latents use their full support as the bank, so their moments are exact.
// ESN latents are recurrent: realized latents form one chain per agent and
// each bank replica k forms its own chain, all started from zero at t = 0.

#pragma once

#include "mfnash/core.hpp"
#include "mfnash/encoders.hpp"
#include "mfnash/model.hpp"
#include "mfnash/random.hpp"

#include <algorithm>
#include <iterator>
#include <map>
#include <string>
#include <vector>

namespace mfnash {

enum class LatentKind { Deterministic, Discrete, Gaussian, Rfn, Esn };

inline LatentKind parse_latent_kind(const std::string& name) {
    if (name == "deterministic") return LatentKind::Deterministic;
    if (name == "discrete") return LatentKind::Discrete;
    if (name == "gaussian") return LatentKind::Gaussian;
    if (name == "rfn") return LatentKind::Rfn;
    if (name == "esn") return LatentKind::Esn;
    throw SpecError("unknown latent kind '" + name + "'");
}

inline std::string to_string(LatentKind k) {
    switch (k) {
        case LatentKind::Deterministic: return "deterministic";
        case LatentKind::Discrete: return "discrete";
        case LatentKind::Gaussian: return "gaussian";
        case LatentKind::Rfn: return "rfn";
        case LatentKind::Esn: return "esn";
    }
    return "unknown";
}

struct LatentSpec {
    LatentKind kind{LatentKind::Deterministic};
    std::vector<Mat> schedule;  ///< deterministic: Z_t = schedule[t mod size]
    std::vector<Mat> support;   ///< discrete: uniform over these matrices
    Mat mean;                   ///< gaussian: mean matrix
    double stddev{0.0};         ///< gaussian: entrywise standard deviation
    double encoder_sigma{0.1};  ///< rfn/esn noise scale
    Activation activation{Activation::HardSigmoid};
    double recurrence_scale{0.9};
    int mc_samples{64};

    [[nodiscard]] bool is_encoder() const { return kind == LatentKind::Rfn || kind == LatentKind::Esn; }
    /// True when every agent shares the same bank.
    [[nodiscard]] bool agent_independent_bank() const {
        return kind == LatentKind::Deterministic || kind == LatentKind::Discrete;
    }
};

/// Lazily evaluated latents for a pool of N agents.
class LatentProcess {
public:
    LatentProcess(LatentSpec spec, int dim_y, int dim_z, int N, std::uint64_t seed,
                  const std::vector<Vec>* features = nullptr)
        : spec_(std::move(spec)), dim_y_(dim_y), dim_z_(dim_z), seed_(seed), features_(features) {
        if (N < 1) throw ParamError("latent process needs at least one agent");
        validate();
        agents_.resize(static_cast<std::size_t>(N));
        for (int n = 0; n < N; ++n) {
            auto& a = agents_[static_cast<std::size_t>(n)];
            a.stream = static_cast<std::uint64_t>(n);
            a.post = Mat::Identity(dim_z, dim_z);
            if (spec_.is_encoder()) {
                auto rng = make_rng(seed_, a.stream, 0, Stream::Params);
                if (spec_.kind == LatentKind::Rfn)
                    a.rfn = sample_rfn(dim_y, dim_x(), dim_z, spec_.encoder_sigma, rng);
                else
                    a.esn = sample_esn(dim_y, dim_x(), dim_z, spec_.encoder_sigma, spec_.activation, rng,
                                       spec_.recurrence_scale);
            }
        }
        next_stream_ = static_cast<std::uint64_t>(N);
    }

    [[nodiscard]] int size() const { return static_cast<int>(agents_.size()); }
    [[nodiscard]] const LatentSpec& spec() const { return spec_; }

    /// Realized latent of agent n at time t.
    Mat realized(int n, int t) {
        auto& a = agent(n);
        check_time(t);
        switch (spec_.kind) {
            case LatentKind::Deterministic:
                return spec_.schedule[static_cast<std::size_t>(t) % spec_.schedule.size()];
            case LatentKind::Discrete: {
                auto rng = make_rng(seed_, a.stream, static_cast<std::uint64_t>(t), Stream::Realized);
                std::uniform_int_distribution<std::size_t> pick(0, spec_.support.size() - 1);
                return spec_.support[pick(rng)];
            }
            case LatentKind::Gaussian: {
                auto rng = make_rng(seed_, a.stream, static_cast<std::uint64_t>(t), Stream::Realized);
                return spec_.mean + spec_.stddev * gaussian_matrix(dim_y_, dim_z_, rng);
            }
            case LatentKind::Rfn: {
                auto rng = make_rng(seed_, a.stream, static_cast<std::uint64_t>(t), Stream::Realized);
                const Eigen::RowVectorXd noise = gaussian_matrix(1, dim_z_, rng);
                return rfn_encode(feature(t), a.rfn, noise) * a.post;
            }
            case LatentKind::Esn: {
                while (static_cast<int>(a.chain.size()) <= t) {
                    const int s = static_cast<int>(a.chain.size());
                    const Mat prev = s == 0 ? Mat::Zero(dim_y_, dim_z_) : a.chain.back();
                    auto rng = make_rng(seed_, a.stream, static_cast<std::uint64_t>(s), Stream::Realized);
                    const Eigen::RowVectorXd noise = gaussian_matrix(1, dim_z_, rng);
                    a.chain.push_back(esn_encode(feature(s), prev, a.esn, noise));
                }
                return a.chain[static_cast<std::size_t>(t)] * a.post;
            }
        }
        throw SpecError("unreachable latent kind");
    }

    /// Monte-Carlo replicas of agent n's latent at time t.
    std::vector<Mat> bank(int n, int t) {
        auto& a = agent(n);
        check_time(t);
        switch (spec_.kind) {
            case LatentKind::Deterministic:
                return {spec_.schedule[static_cast<std::size_t>(t) % spec_.schedule.size()]};
            case LatentKind::Discrete:
                return spec_.support;
            case LatentKind::Gaussian: {
                auto rng = make_rng(seed_, a.stream, static_cast<std::uint64_t>(t), Stream::Bank);
                std::vector<Mat> out;
                out.reserve(static_cast<std::size_t>(spec_.mc_samples));
                for (int k = 0; k < spec_.mc_samples; ++k)
                    out.push_back(spec_.mean + spec_.stddev * gaussian_matrix(dim_y_, dim_z_, rng));
                return out;
            }
            case LatentKind::Rfn: {
                auto rng = make_rng(seed_, a.stream, static_cast<std::uint64_t>(t), Stream::Bank);
                std::vector<Mat> out;
                out.reserve(static_cast<std::size_t>(spec_.mc_samples));
                const Vec& x = feature(t);
                for (int k = 0; k < spec_.mc_samples; ++k) {
                    const Eigen::RowVectorXd noise = gaussian_matrix(1, dim_z_, rng);
                    out.push_back(rfn_encode(x, a.rfn, noise) * a.post);
                }
                return out;
            }
            case LatentKind::Esn: {
                const auto& raw = esn_bank(a, t);
                std::vector<Mat> out;
                out.reserve(raw.size());
                for (const auto& z : raw) out.push_back(z * a.post);
                return out;
            }
        }
        throw SpecError("unreachable latent kind");
    }

    /// Bank of agent n over [t0, t0 + count).
    SampleBank agent_bank(int n, int t0, int count) {
        SampleBank b;
        b.dim_y = dim_y_;
        b.dim_z = dim_z_;
        for (int t = t0; t < t0 + count; ++t) b.samples.push_back(bank(n, t));
        return b;
    }

    /// Population bank over [t0, t0 + count): at most mc_samples draws taken
    /// round-robin across agents, or the shared bank when it is agent-independent.
    SampleBank pooled_bank(int t0, int count) {
        if (spec_.agent_independent_bank()) return agent_bank(0, t0, count);
        SampleBank b;
        b.dim_y = dim_y_;
        b.dim_z = dim_z_;
        const int N = size();
        const int per = std::max(1, (spec_.mc_samples + N - 1) / N);
        for (int t = t0; t < t0 + count; ++t) {
            std::vector<std::vector<Mat>> per_agent;
            per_agent.reserve(static_cast<std::size_t>(N));
            for (int n = 0; n < N; ++n) per_agent.push_back(bank(n, t));
            std::vector<Mat> draws;
            for (int k = 0; k < per && static_cast<int>(draws.size()) < spec_.mc_samples; ++k)
                for (int n = 0; n < N && static_cast<int>(draws.size()) < spec_.mc_samples; ++n)
                    draws.push_back(per_agent[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)]);
            b.samples.push_back(std::move(draws));
        }
        return b;
    }

    /// Flattened encoder parameters of agent n.
    [[nodiscard]] Vec params(int n) const {
        const auto& a = agents_.at(static_cast<std::size_t>(n));
        if (spec_.kind == LatentKind::Rfn) return flatten(a.rfn);
        if (spec_.kind == LatentKind::Esn) return flatten(a.esn);
        throw SpecError("latent kind '" + to_string(spec_.kind) + "' has no encoder parameters");
    }

    /// Installs new encoder parameters and post-composition for agent n on a fresh stream.
    void replace(int n, const Vec& flat, const Mat& post) {
        auto& a = agent(n);
        if (spec_.kind == LatentKind::Rfn)
            a.rfn = unflatten(flat, a.rfn);
        else if (spec_.kind == LatentKind::Esn)
            a.esn = unflatten(flat, a.esn);
        else
            throw SpecError("only encoder latents can be respawned");
        if (post.rows() != dim_z_ || post.cols() != dim_z_) throw RangeError("post-composition must be d_z x d_z");
        a.post = post;
        a.stream = next_stream_++;
        a.chain.clear();
        a.bank_cache.clear();
    }

    /// Changes the post-composition of agent n without touching its streams.
    void set_post(int n, const Mat& post) {
        if (post.rows() != dim_z_ || post.cols() != dim_z_) throw RangeError("post-composition must be d_z x d_z");
        agent(n).post = post;
    }

private:
    struct Agent {
        std::uint64_t stream{0};
        RfnParams rfn;
        EsnParams esn;
        Mat post;
        std::vector<Mat> chain;
        std::map<int, std::vector<Mat>> bank_cache;
    };

    void validate() const {
        if (dim_y_ < 1 || dim_z_ < 1) throw ParamError("latent dimensions must be positive");
        if (spec_.mc_samples < 1) throw ParamError("mc_samples must be positive");
        auto check_shapes = [&](const std::vector<Mat>& ms, const char* what) {
            if (ms.empty()) throw SpecError(std::string(what) + " must be nonempty");
            for (const auto& m : ms)
                if (m.rows() != dim_y_ || m.cols() != dim_z_)
                    throw SpecError(std::string(what) + " entries must be d_y x d_z");
        };
        switch (spec_.kind) {
            case LatentKind::Deterministic: check_shapes(spec_.schedule, "latent schedule"); break;
            case LatentKind::Discrete: check_shapes(spec_.support, "latent support"); break;
            case LatentKind::Gaussian:
                check_shapes({spec_.mean}, "latent mean");
                if (!(spec_.stddev >= 0.0)) throw SpecError("latent stddev must be nonnegative");
                break;
            case LatentKind::Rfn:
            case LatentKind::Esn:
                if (features_ == nullptr || features_->empty())
                    throw SpecError("encoder latents need a feature sequence");
                if (!(spec_.encoder_sigma >= 0.0)) throw SpecError("encoder sigma must be nonnegative");
                break;
        }
    }

    [[nodiscard]] int dim_x() const { return static_cast<int>(features_->front().size()); }

    /// Input for the step that predicts target t + 1.
    [[nodiscard]] const Vec& feature(int t) const {
        const auto i = static_cast<std::size_t>(t) + 1;
        if (i >= features_->size()) throw RangeError("no feature for step t=" + std::to_string(t));
        return (*features_)[i];
    }

    Agent& agent(int n) {
        if (n < 0 || n >= size()) throw RangeError("agent index out of range");
        return agents_[static_cast<std::size_t>(n)];
    }

    static void check_time(int t) {
        if (t < 0) throw RangeError("negative timestep");
    }

    const std::vector<Mat>& esn_bank(Agent& a, int t) {
        if (auto it = a.bank_cache.find(t); it != a.bank_cache.end()) return it->second;
        // Extend from the latest cached step below t, or restart the chains at zero.
        int s = -1;
        if (!a.bank_cache.empty()) {
            auto it = a.bank_cache.lower_bound(t);
            if (it != a.bank_cache.begin()) s = std::prev(it)->first;
        }
        std::vector<Mat> prev = s < 0 ? std::vector<Mat>(static_cast<std::size_t>(spec_.mc_samples),
                                                          Mat::Zero(dim_y_, dim_z_))
                                      : a.bank_cache[s];
        for (int u = s + 1; u <= t; ++u) {
            auto rng = make_rng(seed_, a.stream, static_cast<std::uint64_t>(u), Stream::Bank);
            const Vec& x = feature(u);
            for (auto& z : prev) {
                const Eigen::RowVectorXd noise = gaussian_matrix(1, dim_z_, rng);
                z = esn_encode(x, z, a.esn, noise);
            }
            a.bank_cache[u] = prev;
        }
        // Keep a bounded trailing window of cached steps.
        while (a.bank_cache.size() > kBankCacheSteps && a.bank_cache.begin()->first < t)
            a.bank_cache.erase(a.bank_cache.begin());
        return a.bank_cache.at(t);
    }

    static constexpr std::size_t kBankCacheSteps = 64;

    LatentSpec spec_;
    int dim_y_;
    int dim_z_;
    std::uint64_t seed_;
    const std::vector<Vec>* features_;
    std::vector<Agent> agents_;
    std::uint64_t next_stream_{0};
};

}  // namespace mfnash
