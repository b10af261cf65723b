// Homogeneity-reduced centralized Nash solver.
//
// Under exchangeable latent moments, agent 1's value matrix P_1 has the
// repeating layout (Pi1 at (1,1), Pi2 on the rest of row 1, Pi2^T on the
// rest of column 1, Pi3 on the remaining diagonal and Pi4 elsewhere) and
// S_1 = (Xi1, Xi2, ..., Xi2). Every other agent's coefficients follow by
// permutation, and each agent's feedback law reads
//     beta^n_t = G1(t) Y^n_t + G2(t) sum_{j != n} Y^j_t + H(t).
// The recursion below propagates the patterns exactly with products whose
// cost does not depend on N.

#pragma once

#include "mfnash/block_pattern.hpp"
#include "mfnash/core.hpp"
#include "mfnash/model.hpp"
#include "mfnash/nash_full.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace mfnash {

/// Fixed-dimension coefficients of the reduced centralized policy.
struct ReducedCoeffs {
    int N{0};
    int T{0};
    int dim_y{0};
    int dim_z{0};
    // Value-function blocks, indexed t = 0..T.
    std::vector<Mat> Pi1, Pi2, Pi3, Pi4;
    std::vector<Vec> Xi1, Xi2;
    // Feedback law and stage intermediates, indexed t = 0..T-1.
    std::vector<Mat> G1N, G2N;
    std::vector<Vec> HN;
    std::vector<Mat> FN, KN, MN, EN;
    std::vector<Mat> Q1N, Q2N, Q3N, Q4N;
    std::vector<double> inverse_residual;  ///< block-inverse identity residual per stage
    std::vector<double> pi3_pi4_gap;       ///< max |Pi3 - Pi4| per stage, t = 0..T
};

/// Inverse blocks of the N-block matrix with F on the diagonal and K elsewhere.
struct BlockInverse {
    Mat M;  ///< diagonal block of the inverse
    Mat E;  ///< off-diagonal block of the inverse
};

/// Diagonal and off-diagonal blocks of the inverse of the exchangeable
/// matrix with blocks F (diagonal) and K (off-diagonal), N blocks per side.
inline BlockInverse block_inverse(const Mat& F, const Mat& K, int N) {
    if (N < 1) throw ParamError("block_inverse: N must be positive");
    const Eigen::PartialPivLU<Mat> Flu(F);
    if (!(Flu.rcond() > 1e-14)) throw SolveError("block_inverse: F is singular");
    const Mat Finv = Flu.inverse();
    const Mat I = Mat::Identity(F.rows(), F.cols());
    const Mat S = F + (N - 2.0) * K - (N - 1.0) * K * Finv * K;
    const Eigen::PartialPivLU<Mat> Slu(S);
    if (!(Slu.rcond() > 1e-14))
        throw SolveError("block_inverse: F + (N-2)K - (N-1)K F^-1 K is singular");
    BlockInverse out;
    out.E = -Slu.solve(K * Finv);
    out.M = Finv * (I - (N - 1.0) * K * out.E);
    return out;
}

/// Residual of F M + (N-1) K E = I and K M + [F + (N-2) K] E = 0.
inline double block_inverse_residual(const Mat& F, const Mat& K, const BlockInverse& inv, int N) {
    const Mat I = Mat::Identity(F.rows(), F.cols());
    const double r1 = max_abs(F * inv.M + (N - 1.0) * K * inv.E - I);
    const double r2 = max_abs(K * inv.M + (F + (N - 2.0) * K) * inv.E);
    return std::max(r1, r2);
}

namespace detail {

inline void reserve_reduced(ReducedCoeffs& c, const GameParams& p) {
    const int T = p.horizon_T;
    const int dy = p.dim_y;
    const int dz = p.dim_z;
    c.N = p.population_N;
    c.T = T;
    c.dim_y = dy;
    c.dim_z = dz;
    const auto n1 = static_cast<std::size_t>(T + 1);
    const auto n0 = static_cast<std::size_t>(T);
    const Mat Zy = Mat::Zero(dy, dy);
    const Mat Zz = Mat::Zero(dz, dz);
    c.Pi1.assign(n1, Zy);
    c.Pi2.assign(n1, Zy);
    c.Pi3.assign(n1, Zy);
    c.Pi4.assign(n1, Zy);
    c.Xi1.assign(n1, Vec::Zero(dy));
    c.Xi2.assign(n1, Vec::Zero(dy));
    c.G1N.assign(n0, Mat::Zero(dz, dy));
    c.G2N.assign(n0, Mat::Zero(dz, dy));
    c.HN.assign(n0, Vec::Zero(dz));
    for (auto* v : {&c.FN, &c.KN, &c.MN, &c.EN, &c.Q1N, &c.Q2N, &c.Q3N, &c.Q4N}) v->assign(n0, Zz);
    c.inverse_residual.assign(n0, 0.0);
    c.pi3_pi4_gap.assign(n1, 0.0);
}

/// Single-agent population: read the blocks off the full solver.
inline ReducedCoeffs reduced_from_full_single(const GameParams& p, const MomentSet& mom,
                                              const TargetSeries& targets) {
    ReducedCoeffs c;
    reserve_reduced(c, p);
    const FullNashCoeffs full = full_backward_pass(p, mom, targets);
    const Mat Idz = Mat::Identity(p.dim_z, p.dim_z);
    for (int t = 0; t <= p.horizon_T; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        c.Pi1[ti] = full.P[ti][0];
        c.Xi1[ti] = full.S[ti][0];
        if (t == p.horizon_T) break;
        const double delta = p.discount(t);
        c.G1N[ti] = full.G[ti];
        c.HN[ti] = full.H[ti];
        c.FN[ti] = delta * (p.kappa * mom.m2(t) + p.gamma * Idz) + mom.weighted_m2(t, full.P[ti + 1][0]);
        c.MN[ti] = c.FN[ti].inverse();
        c.Q1N[ti] = c.FN[ti];
        c.inverse_residual[ti] = max_abs(c.FN[ti] * c.MN[ti] - Idz);
    }
    return c;
}

}  // namespace detail

/// Backward recursion of the reduced blocks from terminal zeros at t = T.
/// A single-agent population is delegated to the full solver.
inline ReducedCoeffs reduced_backward_pass(const GameParams& p, const MomentSet& mom,
                                           const TargetSeries& targets) {
    p.validate();
    mom.validate_for(p);
    targets.validate_for(p);
    if (p.population_N == 1) return detail::reduced_from_full_single(p, mom, targets);

    ReducedCoeffs c;
    detail::reserve_reduced(c, p);

    const int Ni = p.population_N;
    const double N = Ni;
    const int dy = p.dim_y;
    const int dz = p.dim_z;
    const double kappa = p.kappa;
    const double kbar = p.kappa_bar;
    const double own = 1.0 - 1.0 / N;  // d(Y^n - mean)/dY^n
    const Mat& th = p.theta;
    const Mat& thb = p.theta_bar;
    const Mat Idz = Mat::Identity(dz, dz);

    // Row blocks of agent 1's own prediction and of its deviation from the mean.
    const Mat a1 = th + thb / N;
    const Mat a2 = thb / N;
    const Mat b1 = own * th;
    const Mat b2 = -th / N;
    const BlockPattern Tt = BlockPattern::exchangeable(a1, a2);

    BlockPattern P = BlockPattern::zero(dy, dy);
    VectorPattern Xi{Vec::Zero(dy), Vec::Zero(dy)};

    for (int t = p.horizon_T - 1; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        const double delta = p.discount(t);
        const Mat& m1 = mom.m1(t);
        const Mat& m2 = mom.m2(t);
        const Mat m1t = m1.transpose();
        const Mat m1tm1 = m1t * m1;
        const Vec& y = targets.values[ti + 1];

        // Stage system blocks and their inverse.
        const Mat F = delta * ((kappa + kbar * own * own) * m2 + p.gamma * Idz) + mom.weighted_m2(t, P.a);
        const Mat K = -delta * kbar * own / N * m1tm1 + m1t * P.b * m1;
        BlockInverse inv;
        try {
            inv = block_inverse(F, K, Ni);
        } catch (const SolveError& err) {
            throw SolveError(std::string(err.what()) + " at t=" + std::to_string(t));
        }
        c.FN[ti] = F;
        c.KN[ti] = K;
        c.MN[ti] = inv.M;
        c.EN[ti] = inv.E;
        c.inverse_residual[ti] = block_inverse_residual(F, K, inv, Ni);

        // Feedback gains G = -Inv R and offsets H = -Inv h.
        const BlockPattern PT = multiply(P, Tt, N);
        const Mat Rd = delta * (kappa + kbar * own * own) * m1t * th + delta * kappa / N * m1t * thb + m1t * PT.a;
        const Mat Ro = -delta * kbar * own / N * m1t * th + delta * kappa / N * m1t * thb + m1t * PT.b;
        const BlockPattern Inv = BlockPattern::exchangeable(inv.M, inv.E);
        const BlockPattern G = -1.0 * multiply(Inv, BlockPattern::exchangeable(Rd, Ro), N);
        const Vec h = -delta * kappa * m1t * y + m1t * Xi.v1;
        const Vec H = -(inv.M + (N - 1.0) * inv.E) * h;
        c.G1N[ti] = G.a;
        c.G2N[ti] = G.b;
        c.HN[ti] = H;

        // Agent 1's expected quadratic cost of the stacked action.
        BlockPattern Q{
            delta * ((kappa + kbar * own * own) * m2 + p.gamma * Idz) + mom.weighted_m2(t, P.a),
            -delta * kbar * own / N * m1tm1 + m1t * P.b * m1,
            -delta * kbar * own / N * m1tm1 + m1t * P.c * m1,
            delta * kbar / (N * N) * m2 + mom.weighted_m2(t, P.d),
            delta * kbar / (N * N) * m1tm1 + m1t * P.e * m1,
        };
        c.Q1N[ti] = Q.a;
        c.Q2N[ti] = Q.b;
        c.Q3N[ti] = Q.d;
        c.Q4N[ti] = Q.e;

        // Cross term between the stacked action and the current predictions.
        const BlockPattern EZt = BlockPattern::diagonal(m1t);
        BlockPattern L = delta * kappa * BlockPattern{m1t * a1, m1t * a2, Mat::Zero(dz, dy), Mat::Zero(dz, dy), Mat::Zero(dz, dy)} +
                         delta * kbar * BlockPattern::outer(own * m1, -m1 / N, b1, b2) +
                         multiply(EZt, PT, N);

        const BlockPattern Const = delta * kappa * BlockPattern::outer(a1, a2, a1, a2) +
                                   delta * kbar * BlockPattern::outer(b1, b2, b1, b2);

        const BlockPattern Gt = G.transpose();
        const BlockPattern Lt = L.transpose();
        const BlockPattern Pnew = multiply(multiply(Gt, Q, N), G, N) + multiply(Gt, L, N) +
                                  multiply(Lt, G, N) + Const +
                                  multiply(multiply(Tt.transpose(), P, N), Tt, N);

        const VectorPattern Hv = VectorPattern::uniform(H);
        VectorPattern lin = multiply(EZt, Xi, N);
        lin.v1 -= delta * kappa * m1t * y;
        VectorPattern track{-delta * kappa * a1.transpose() * y, -delta * kappa * a2.transpose() * y};
        const VectorPattern Xinew = multiply(multiply(Gt, Q, N), Hv, N) + multiply(Gt, lin, N) +
                                    multiply(Lt, Hv, N) + track + multiply(Tt.transpose(), Xi, N);

        P = Pnew;
        Xi = Xinew;
        c.Pi1[ti] = P.a;
        c.Pi2[ti] = P.b;
        c.Pi3[ti] = P.d;
        c.Pi4[ti] = P.e;
        c.Xi1[ti] = Xi.v1;
        c.Xi2[ti] = Xi.v2;
        c.pi3_pi4_gap[ti] = max_abs(P.d - P.e);
    }
    return c;
}

/// Agent action beta^n_t = G1 Y^n_t + G2 sum_{j != n} Y^j_t + H.
inline Vec reduced_action(int t, const Vec& own_prediction, const Vec& others_sum, const ReducedCoeffs& c) {
    if (t < 0 || t >= c.T) throw RangeError("reduced_action: t out of range");
    const auto ti = static_cast<std::size_t>(t);
    return c.G1N[ti] * own_prediction + c.G2N[ti] * others_sum + c.HN[ti];
}

}  // namespace mfnash
