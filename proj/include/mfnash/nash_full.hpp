// Exact centralized Nash solver for a finite population.
//
// Agent n's value function is V_n(t, Y) = Y^T P_n(t) Y + 2 S_n(t)^T Y + r_n(t)
// on the stacked prediction vector Y in R^{N d_y}. At every stage the N
// first-order conditions form one regularized linear system of size N d_z
// whose solution is the feedback law beta_t = G(t) Y_t + H(t). Expectations
// over latents use one shared moment set: E[Z^n^T W Z^n] is the weighted
// second moment and, for m != n, E[Z^m^T W Z^n] = m1^T W m1.

#pragma once

#include "mfnash/core.hpp"
#include "mfnash/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mfnash {

/// Time-indexed coefficients of the centralized Nash feedback law.
struct FullNashCoeffs {
    int N{0};
    int T{0};
    int dim_y{0};
    int dim_z{0};
    std::vector<std::vector<Mat>> P;  ///< P[t][n], t = 0..T, each N d_y x N d_y
    std::vector<std::vector<Vec>> S;  ///< S[t][n], t = 0..T, each N d_y
    std::vector<Mat> G;               ///< G[t], t = 0..T-1, N d_z x N d_y
    std::vector<Vec> H;               ///< H[t], t = 0..T-1, N d_z
    std::vector<double> condition;    ///< 1-norm condition estimate of each stage system
};

namespace detail {

/// Stacked dynamics matrix I (x) theta + (1/N) 11^T (x) theta_bar.
inline Mat stacked_theta(const GameParams& p) {
    const int N = p.population_N;
    const int dy = p.dim_y;
    Mat out = Mat::Zero(N * dy, N * dy);
    for (int n = 0; n < N; ++n)
        for (int m = 0; m < N; ++m)
            out.block(n * dy, m * dy, dy, dy) =
                (n == m ? p.theta : Mat::Zero(dy, dy)) + p.theta_bar / N;
    return out;
}

/// Expected Z^T W Z for the block-diagonal latent matrix diag(Z^1..Z^N).
inline Mat expected_quadratic(const MomentSet& mom, int t, const Mat& W, int N, int dy, int dz) {
    const Mat& m1 = mom.m1(t);
    Mat out(N * dz, N * dz);
    for (int m = 0; m < N; ++m)
        for (int k = 0; k < N; ++k) {
            const Mat Wmk = W.block(m * dy, k * dy, dy, dy);
            out.block(m * dz, k * dz, dz, dz) =
                m == k ? mom.weighted_m2(t, Wmk) : Mat(m1.transpose() * Wmk * m1);
        }
    return out;
}

}  // namespace detail

/// Backward recursion for P_n, S_n, G, H from terminal zeros at t = T.
inline FullNashCoeffs full_backward_pass(const GameParams& p, const MomentSet& mom,
                                         const TargetSeries& targets) {
    p.validate();
    mom.validate_for(p);
    targets.validate_for(p);

    const int N = p.population_N;
    const int T = p.horizon_T;
    const int dy = p.dim_y;
    const int dz = p.dim_z;
    const int ny = N * dy;
    const int nz = N * dz;
    const double invN = 1.0 / N;
    const double kb = p.kappa_bar * (1.0 - invN);  // consensus weight times d(Y^n - mean)/dY^n

    FullNashCoeffs c;
    c.N = N;
    c.T = T;
    c.dim_y = dy;
    c.dim_z = dz;
    c.P.assign(static_cast<std::size_t>(T + 1), std::vector<Mat>(static_cast<std::size_t>(N), Mat::Zero(ny, ny)));
    c.S.assign(static_cast<std::size_t>(T + 1), std::vector<Vec>(static_cast<std::size_t>(N), Vec::Zero(ny)));
    c.G.assign(static_cast<std::size_t>(T), Mat::Zero(nz, ny));
    c.H.assign(static_cast<std::size_t>(T), Vec::Zero(nz));
    c.condition.assign(static_cast<std::size_t>(T), 1.0);

    const Mat Tt = detail::stacked_theta(p);
    const Mat Idz = Mat::Identity(dz, dz);

    for (int t = T - 1; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        const double delta = p.discount(t);
        const Mat& m1 = mom.m1(t);
        const Mat& m2 = mom.m2(t);
        const Mat m1tm1 = m1.transpose() * m1;
        const Vec& y = targets.values[ti + 1];
        const auto& Pn1 = c.P[ti + 1];
        const auto& Sn1 = c.S[ti + 1];

        // Block-diagonal mean latent, E diag(Z^1..Z^N).
        Mat EZ = Mat::Zero(ny, nz);
        for (int n = 0; n < N; ++n) EZ.block(n * dy, n * dz, dy, dz) = m1;

        // Stacked first-order conditions A beta = -(R Y + h).
        Mat A(nz, nz);
        Mat R(nz, ny);
        Vec h(nz);
        for (int n = 0; n < N; ++n) {
            const Mat& P = Pn1[static_cast<std::size_t>(n)];
            const Mat PT = P * Tt;
            for (int m = 0; m < N; ++m) {
                const Mat Pnm = P.block(n * dy, m * dy, dy, dy);
                if (m == n) {
                    A.block(n * dz, m * dz, dz, dz) =
                        delta * ((p.kappa + kb * (1.0 - invN)) * m2 + p.gamma * Idz) +
                        mom.weighted_m2(t, Pnm);
                } else {
                    A.block(n * dz, m * dz, dz, dz) =
                        -delta * kb * invN * m1tm1 + m1.transpose() * Pnm * m1;
                }
                const double own = n == m ? 1.0 : 0.0;
                R.block(n * dz, m * dy, dz, dy) =
                    delta * (p.kappa * m1.transpose() * Tt.block(n * dy, m * dy, dy, dy) +
                             kb * (own - invN) * m1.transpose() * p.theta) +
                    m1.transpose() * PT.block(n * dy, m * dy, dy, dy);
            }
            h.segment(n * dz, dz) =
                -delta * p.kappa * m1.transpose() * y +
                m1.transpose() * Sn1[static_cast<std::size_t>(n)].segment(n * dy, dy);
        }

        const Eigen::PartialPivLU<Mat> lu(A);
        const double rcond = lu.rcond();
        if (!(rcond > 1e-14) || !std::isfinite(rcond))
            throw SolveError("full Nash system is singular at t=" + std::to_string(t));
        c.condition[ti] = 1.0 / rcond;
        const Mat G = -lu.solve(R);
        const Vec H = -lu.solve(h);
        c.G[ti] = G;
        c.H[ti] = H;

        for (int n = 0; n < N; ++n) {
            const auto ni = static_cast<std::size_t>(n);
            const Mat& P = Pn1[ni];
            const Vec& S = Sn1[ni];

            // Row selectors of agent n's own prediction and its deviation from the mean.
            Mat a_n(dy, ny);
            Mat b_n(dy, ny);
            for (int m = 0; m < N; ++m) {
                const double own = n == m ? 1.0 : 0.0;
                a_n.block(0, m * dy, dy, dy) = own * p.theta + p.theta_bar * invN;
                b_n.block(0, m * dy, dy, dy) = (own - invN) * p.theta;
            }

            // Second moments of the action-dependent parts of Y^n_{t+1} and Y^n_{t+1} - mean.
            Mat Q = detail::expected_quadratic(mom, t, P, N, dy, dz);
            Mat Ec(nz, dy);
            for (int m = 0; m < N; ++m) {
                const double cm = (m == n ? 1.0 : 0.0) - invN;
                Ec.block(m * dz, 0, dz, dy) = cm * m1.transpose();
                for (int k = 0; k < N; ++k) {
                    const double ck = (k == n ? 1.0 : 0.0) - invN;
                    Q.block(m * dz, k * dz, dz, dz) +=
                        delta * p.kappa_bar * cm * ck * (m == k ? m2 : m1tm1);
                }
            }
            Q.block(n * dz, n * dz, dz, dz) += delta * (p.kappa * m2 + p.gamma * Idz);

            Mat L = delta * p.kappa_bar * Ec * b_n + EZ.transpose() * P * Tt;
            L.block(n * dz, 0, dz, ny) += delta * p.kappa * m1.transpose() * a_n;

            Mat Pnew = G.transpose() * Q * G + G.transpose() * L + L.transpose() * G +
                       delta * (p.kappa * a_n.transpose() * a_n +
                                p.kappa_bar * b_n.transpose() * b_n) +
                       Tt.transpose() * P * Tt;

            Vec lin = EZ.transpose() * S;
            lin.segment(n * dz, dz) -= delta * p.kappa * m1.transpose() * y;
            Vec Snew = G.transpose() * Q * H + G.transpose() * lin + L.transpose() * H -
                       delta * p.kappa * a_n.transpose() * y + Tt.transpose() * S;

            c.P[ti][ni] = std::move(Pnew);
            c.S[ti][ni] = std::move(Snew);
        }
    }
    return c;
}

/// Stacked Nash actions beta_t = G(t) Y_t + H(t).
inline Vec full_action(int t, const Vec& predictions, const FullNashCoeffs& c) {
    if (t < 0 || t >= c.T) throw RangeError("full_action: t out of range");
    if (predictions.size() != c.N * c.dim_y) throw RangeError("full_action: prediction size mismatch");
    const auto ti = static_cast<std::size_t>(t);
    return c.G[ti] * predictions + c.H[ti];
}

/// Deviation of the full-solver blocks from the repeating pattern implied by
/// agent exchangeability.
struct StructureReport {
    double max_deviation{0.0};     ///< largest deviation over all checks below
    double pattern_deviation{0.0};  ///< P_1 blocks against the (Pi1..Pi4) pattern
    double permutation_deviation{0.0};  ///< P_n against the permuted P_1, S_n against permuted S_1
    double vector_deviation{0.0};  ///< S_1 blocks against (Xi1, Xi2, ..., Xi2)
    double symmetry_deviation{0.0};  ///< max |P_n - P_n^T|
    bool has_pi4{true};            ///< false for N = 2, where no (j,k) off-diagonal block exists
    std::string note;
};

namespace detail {

/// Permutation matrix swapping the d-blocks of agents i and j.
inline Mat swap_permutation(int N, int d, int i, int j) {
    Eigen::VectorXi perm(N * d);
    for (int n = 0; n < N; ++n) {
        const int src = n == i ? j : (n == j ? i : n);
        for (int k = 0; k < d; ++k) perm(n * d + k) = src * d + k;
    }
    Mat J = Mat::Zero(N * d, N * d);
    for (int r = 0; r < N * d; ++r) J(r, perm(r)) = 1.0;
    return J;
}

}  // namespace detail

/// Checks the repeating block pattern of (P_1, S_1) and the permutation
/// relations P_n = J_1n^T P_1 J_1n, S_n = J_1n^T S_1 at every stage.
inline StructureReport check_block_structure(const FullNashCoeffs& c, double tol = kTolerances.symmetry) {
    StructureReport rep;
    const int N = c.N;
    const int d = c.dim_y;
    rep.has_pi4 = N >= 3;
    if (N == 2) rep.note = "N=2: pattern reduces to (Pi1, Pi2; Pi2^T, Pi3), no Pi4 blocks";
    if (N == 1) rep.note = "N=1: single block, nothing to compare";
    auto blk = [d](const Mat& P, int i, int j) { return P.block(i * d, j * d, d, d); };
    for (std::size_t t = 0; t < c.P.size(); ++t) {
        const Mat& P1 = c.P[t][0];
        const Vec& S1 = c.S[t][0];
        if (N >= 2) {
            const Mat Pi2 = blk(P1, 0, 1);
            const Mat Pi3 = blk(P1, 1, 1);
            const Vec Xi2 = S1.segment(d, d);
            for (int j = 1; j < N; ++j) {
                rep.pattern_deviation = std::max(rep.pattern_deviation, max_abs(blk(P1, 0, j) - Pi2));
                rep.pattern_deviation =
                    std::max(rep.pattern_deviation, max_abs(blk(P1, j, 0) - Pi2.transpose()));
                rep.pattern_deviation = std::max(rep.pattern_deviation, max_abs(blk(P1, j, j) - Pi3));
                rep.vector_deviation = std::max(rep.vector_deviation, max_abs(S1.segment(j * d, d) - Xi2));
            }
            if (N >= 3) {
                const Mat Pi4 = blk(P1, 1, 2);
                for (int j = 1; j < N; ++j)
                    for (int k = 1; k < N; ++k)
                        if (j != k)
                            rep.pattern_deviation = std::max(rep.pattern_deviation, max_abs(blk(P1, j, k) - Pi4));
            }
        }
        for (int n = 0; n < N; ++n) {
            const Mat& Pn = c.P[t][static_cast<std::size_t>(n)];
            rep.symmetry_deviation = std::max(rep.symmetry_deviation, max_abs(Pn - Pn.transpose()));
            if (n == 0) continue;
            const Mat J = detail::swap_permutation(N, d, 0, n);
            rep.permutation_deviation =
                std::max(rep.permutation_deviation, max_abs(Pn - J.transpose() * P1 * J));
            rep.permutation_deviation = std::max(
                rep.permutation_deviation, max_abs(c.S[t][static_cast<std::size_t>(n)] - J.transpose() * S1));
        }
    }
    rep.max_deviation = std::max({rep.pattern_deviation, rep.permutation_deviation,
                                  rep.vector_deviation, rep.symmetry_deviation});
    if (rep.max_deviation > tol) {
        if (!rep.note.empty()) rep.note += "; ";
        rep.note += "deviation exceeds tolerance";
    }
    return rep;
}

}  // namespace mfnash
