// Decentralized mean-field policy.
//
// The reduced blocks rescale as Pi1 = L1, Pi2 = L2 / N, Pi3 = L3 / N^2,
// Pi4 = L4 / N^2, Xi1 = chi1, Xi2 = chi2 / N. Dropping the O(1/N) remainders
// gives an N-free recursion for (L1..L4, chi1, chi2) and the feedback law
//     beta^n_t = G1(t) Y^n_t + G2(t) Ybar_t + H(t),
// where Ybar is a deterministic mean-field process computed offline.
//
// Building with MFNASH_DRAFT_SIGN flips the sign of chi1 inside H for A/B
// comparisons against the alternative reading of the offset term.

#pragma once

#include "mfnash/core.hpp"
#include "mfnash/model.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mfnash {

#ifdef MFNASH_DRAFT_SIGN
inline constexpr double kChiSign = -1.0;
#else
inline constexpr double kChiSign = 1.0;
#endif

/// Coefficients of the mean-field (limit) recursion.
struct DecentralizedCoeffs {
    int T{0};
    int dim_y{0};
    int dim_z{0};
    // Rescaled value-function blocks, indexed t = 0..T.
    std::vector<Mat> L1, L2, L3, L4;
    std::vector<Vec> chi1, chi2;
    // Feedback law and stage intermediates, indexed t = 0..T-1.
    std::vector<Mat> G1, G2;
    std::vector<Vec> H;
    std::vector<Mat> F, K, M, E;
    std::vector<Mat> Q1, Q2, Q3, Q4;
    std::vector<double> condition;  ///< max condition estimate of F and F + K per stage
};

/// Mean-field prediction process Ybar_0..Ybar_T.
struct MeanFieldTrajectory {
    std::vector<Vec> ybar;
};

/// Backward recursion of the limit system from terminal zeros at t = T.
inline DecentralizedCoeffs decentralized_backward_pass(const GameParams& p, const MomentSet& mom,
                                                       const TargetSeries& targets) {
    p.validate();
    mom.validate_for(p);
    targets.validate_for(p);

    const int T = p.horizon_T;
    const int dy = p.dim_y;
    const int dz = p.dim_z;
    const double kappa = p.kappa;
    const double kbar = p.kappa_bar;
    const Mat& th = p.theta;
    const Mat& thb = p.theta_bar;
    const Mat tht = th.transpose();
    const Mat thbt = thb.transpose();
    const Mat ths = th + thb;
    const Mat Idz = Mat::Identity(dz, dz);

    DecentralizedCoeffs c;
    c.T = T;
    c.dim_y = dy;
    c.dim_z = dz;
    const auto n1 = static_cast<std::size_t>(T + 1);
    const auto n0 = static_cast<std::size_t>(T);
    for (auto* v : {&c.L1, &c.L2, &c.L3, &c.L4}) v->assign(n1, Mat::Zero(dy, dy));
    c.chi1.assign(n1, Vec::Zero(dy));
    c.chi2.assign(n1, Vec::Zero(dy));
    c.G1.assign(n0, Mat::Zero(dz, dy));
    c.G2.assign(n0, Mat::Zero(dz, dy));
    c.H.assign(n0, Vec::Zero(dz));
    for (auto* v : {&c.F, &c.K, &c.M, &c.E, &c.Q1, &c.Q2, &c.Q3, &c.Q4}) v->assign(n0, Mat::Zero(dz, dz));
    c.condition.assign(n0, 1.0);

    for (int t = T - 1; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        const double delta = p.discount(t);
        const Mat& m1 = mom.m1(t);
        const Mat& m2 = mom.m2(t);
        const Mat m1t = m1.transpose();
        const Mat m1tm1 = m1t * m1;
        const Vec& y = targets.values[ti + 1];
        const Mat& L1 = c.L1[ti + 1];
        const Mat& L2 = c.L2[ti + 1];
        const Mat& L3 = c.L3[ti + 1];
        const Mat& L4 = c.L4[ti + 1];
        const Vec& x1 = c.chi1[ti + 1];
        const Vec& x2 = c.chi2[ti + 1];
        const Mat L2t = L2.transpose();

        const Mat F = delta * ((kappa + kbar) * m2 + p.gamma * Idz) + mom.weighted_m2(t, L1);
        const Mat K = -delta * kbar * m1tm1 + m1t * L2 * m1;
        const Eigen::PartialPivLU<Mat> Flu(F);
        const Eigen::PartialPivLU<Mat> FKlu(F + K);
        const double rF = Flu.rcond();
        const double rFK = FKlu.rcond();
        if (!(rF > 1e-14)) throw SolveError("decentralized: F is singular at t=" + std::to_string(t));
        if (!(rFK > 1e-14)) throw SolveError("decentralized: F + K is singular at t=" + std::to_string(t));
        c.condition[ti] = std::max(1.0 / rF, 1.0 / rFK);
        const Mat M = Flu.inverse();
        const Mat E = -FKlu.solve(K * M);
        const Mat ME = M + E;

        const Mat G1 = -delta * (kappa + kbar) * M * m1t * th - M * m1t * L1 * th;
        const Mat G2 = -delta * (kappa + kbar) * E * m1t * th +
                       delta * ME * m1t * (kbar * th - kappa * thb) -
                       (E * m1t * L1 * th + ME * m1t * L2 * th) -
                       ME * m1t * (L1 + L2) * thb;
        const Vec H = -ME * m1t * (-delta * kappa * y + kChiSign * x1);

        const Mat& Q1 = F;
        const Mat& Q2 = K;
        const Mat Q3 = mom.weighted_m2(t, L3) + delta * kbar * m2;
        const Mat Q4 = m1t * L4 * m1 + delta * kbar * m1tm1;
        const Mat Q2t = Q2.transpose();
        const Mat G1t = G1.transpose();
        const Mat G2t = G2.transpose();
        const Mat G12t = G1t + G2t;
        const Mat Qmix = Q1 + Q2 + Q2t + Q4;

        // Lambda_1
        const Mat lin1 = G1t * (delta * (kappa + kbar) * m1t * th + m1t * L1 * th);
        const Mat L1new = G1t * Q1 * G1 + lin1 + lin1.transpose() + delta * (kappa + kbar) * tht * th +
                          tht * L1 * th;

        // Lambda_2
        const Mat L2new = G1t * Q2 * G1 + G1t * (Q1 + Q2) * G2 +
                          G1t * (delta * m1t * (kappa * thb - kbar * th) + m1t * (L1 * thb + L2 * ths)) +
                          (delta * (kappa * G2t - kbar * G1t) * m1t * th).transpose() +
                          (G2t * m1t * L1 * th).transpose() + (G12t * m1t * L2t * th).transpose() +
                          delta * (kappa * tht * thb - kbar * tht * th) + tht * L2 * th +
                          tht * (L1 + L2) * thb;

        // Lambda_3
        const Mat lin3 = delta * kappa * G2t * m1t * thb + delta * kbar * G1t * m1t * th +
                         G2t * m1t * (L1 * thb + L2 * ths + L2t * thb + L4 * ths) +
                         G1t * m1t * (L2t * thb + L3 * th + L4 * thb);
        const Mat L3new = G1t * Q3 * G1 + G1t * (Q2t + Q4) * G2 + G2t * (Q2 + Q4) * G1 + G2t * Qmix * G2 +
                          lin3 + lin3.transpose() + delta * (kappa * thbt * thb + kbar * tht * th) +
                          tht * L3 * th + tht * (L2t + L4) * thb + thbt * (L2 + L4) * th +
                          thbt * (L1 + L2t + L2 + L4) * thb;

        // Lambda_4
        const Mat lin4 = delta * kappa * G2t * m1t * thb + delta * kbar * G1t * m1t * th +
                         G2t * m1t * (L1 * thb + L2 * ths) + G12t * m1t * (L2t * thb + L4 * ths);
        const Mat L4new = G1t * Q4 * G1 + G1t * (Q2t + Q4) * G2 + G2t * (Q2 + Q4) * G1 + G2t * Qmix * G2 +
                          lin4 + lin4.transpose() + delta * (kappa * thbt * thb + kbar * tht * th) +
                          tht * L4 * th + tht * (L2t + L4) * thb + thbt * (L2 + L4) * th +
                          thbt * (L1 + L2 + L2t + L4) * thb;

        // chi_1 and chi_2
        const Vec MH = m1 * H;
        const Vec chi1new = G1t * (Q1 + Q2) * H - delta * kappa * G1t * m1t * y + G1t * m1t * x1 +
                            delta * kappa * tht * MH + tht * (L1 + L2) * MH - delta * kappa * tht * y +
                            tht * x1;
        const Vec chi2new = G12t * (Q2t + Q4.transpose()) * H + G2t * (Q1 + Q2) * H -
                            delta * kappa * G2t * m1t * y + G1t * m1t * x2 + G2t * m1t * (x1 + x2) +
                            delta * kappa * thbt * MH + thbt * (L1 + L2) * MH +
                            ths.transpose() * (L2t + L4) * MH - delta * kappa * thbt * y + thbt * x1 +
                            ths.transpose() * x2;

        c.F[ti] = F;
        c.K[ti] = K;
        c.M[ti] = M;
        c.E[ti] = E;
        c.Q1[ti] = Q1;
        c.Q2[ti] = Q2;
        c.Q3[ti] = Q3;
        c.Q4[ti] = Q4;
        c.G1[ti] = G1;
        c.G2[ti] = G2;
        c.H[ti] = H;
        c.L1[ti] = L1new;
        c.L2[ti] = L2new;
        c.L3[ti] = L3new;
        c.L4[ti] = L4new;
        c.chi1[ti] = chi1new;
        c.chi2[ti] = chi2new;
    }
    return c;
}

/// Representative-agent action beta = G1 Y^n + G2 Ybar + H; reads only the
/// agent's own prediction and the mean-field state.
inline Vec decentralized_action(int t, const Vec& own_prediction, const Vec& ybar, const DecentralizedCoeffs& c) {
    if (t < 0 || t >= c.T) throw RangeError("decentralized_action: t out of range");
    const auto ti = static_cast<std::size_t>(t);
    return c.G1[ti] * own_prediction + c.G2[ti] * ybar + c.H[ti];
}

/// Ybar_{t+1} = [theta + theta_bar + m1 (G1 + G2)] Ybar_t + m1 H, from Ybar_0 = y0.
inline MeanFieldTrajectory meanfield_forward(const DecentralizedCoeffs& c, const GameParams& p,
                                             const MomentSet& mom, const Vec& y0) {
    MeanFieldTrajectory out;
    out.ybar.reserve(static_cast<std::size_t>(c.T + 1));
    out.ybar.push_back(y0);
    for (int t = 0; t < c.T; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const Mat& m1 = mom.m1(t);
        const Vec& yb = out.ybar.back();
        out.ybar.push_back((p.theta + p.theta_bar + m1 * (c.G1[ti] + c.G2[ti])) * yb + m1 * c.H[ti]);
    }
    return out;
}

}  // namespace mfnash
