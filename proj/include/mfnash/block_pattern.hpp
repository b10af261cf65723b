// Algebra of N x N block matrices whose blocks repeat according to agent
// exchangeability around a distinguished first agent:
//
//     [ a  b  b  ...  b ]
//     [ c  d  e  ...  e ]
//     [ c  e  d  ...  e ]
//     [ :  :     ...  : ]
//     [ c  e  e  ...  d ]
//
// The pattern is closed under products and transposes, so the
// value-function blocks of the reduced solver can be propagated exactly at a
// cost independent of N. N enters only as a scalar and may be any integer
// >= 1; blocks that do not exist for small N are multiplied by zero.

#pragma once

#include "mfnash/core.hpp"

namespace mfnash {

/// Five distinct blocks of an agent-1-centred exchangeable block matrix.
struct BlockPattern {
    Mat a;  ///< (1,1)
    Mat b;  ///< (1,j), j != 1
    Mat c;  ///< (j,1), j != 1
    Mat d;  ///< (j,j), j != 1
    Mat e;  ///< (j,k), j != k, both != 1

    static BlockPattern zero(Eigen::Index rows, Eigen::Index cols) {
        const Mat z = Mat::Zero(rows, cols);
        return {z, z, z, z, z};
    }

    /// Fully exchangeable matrix with the same diagonal and off-diagonal blocks everywhere.
    static BlockPattern exchangeable(const Mat& diag, const Mat& off) {
        return {diag, off, off, diag, off};
    }

    /// Block-diagonal matrix with the same block on every diagonal position.
    static BlockPattern diagonal(const Mat& diag) {
        const Mat z = Mat::Zero(diag.rows(), diag.cols());
        return {diag, z, z, diag, z};
    }

    /// Matrix whose only nonzero block is (1,1).
    static BlockPattern corner(const Mat& a) {
        const Mat z = Mat::Zero(a.rows(), a.cols());
        return {a, z, z, z, z};
    }

    /// Outer product u^T v of two block rows with blocks (u1, u2, ..., u2) and (v1, v2, ..., v2).
    static BlockPattern outer(const Mat& u1, const Mat& u2, const Mat& v1, const Mat& v2) {
        return {u1.transpose() * v1, u1.transpose() * v2, u2.transpose() * v1,
                u2.transpose() * v2, u2.transpose() * v2};
    }

    [[nodiscard]] BlockPattern transpose() const {
        return {a.transpose(), c.transpose(), b.transpose(), d.transpose(), e.transpose()};
    }

    /// Dense N-block matrix, for tests and diagnostics.
    [[nodiscard]] Mat dense(int N) const {
        const auto r = a.rows();
        const auto k = a.cols();
        Mat out(N * r, N * k);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const Mat* blk = nullptr;
                if (i == 0 && j == 0) blk = &a;
                else if (i == 0) blk = &b;
                else if (j == 0) blk = &c;
                else if (i == j) blk = &d;
                else blk = &e;
                out.block(i * r, j * k, r, k) = *blk;
            }
        return out;
    }
};

inline BlockPattern operator+(const BlockPattern& x, const BlockPattern& y) {
    return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d, x.e + y.e};
}

inline BlockPattern operator-(const BlockPattern& x, const BlockPattern& y) {
    return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d, x.e - y.e};
}

inline BlockPattern operator*(double s, const BlockPattern& x) {
    return {s * x.a, s * x.b, s * x.c, s * x.d, s * x.e};
}

/// Product of two patterned matrices with N agents.
inline BlockPattern multiply(const BlockPattern& x, const BlockPattern& y, double N) {
    return {
        x.a * y.a + (N - 1.0) * x.b * y.c,
        x.a * y.b + x.b * y.d + (N - 2.0) * x.b * y.e,
        x.c * y.a + x.d * y.c + (N - 2.0) * x.e * y.c,
        x.c * y.b + x.d * y.d + (N - 2.0) * x.e * y.e,
        x.c * y.b + x.d * y.e + x.e * y.d + (N - 3.0) * x.e * y.e,
    };
}

/// Stacked vector (v1, v2, ..., v2) matching the pattern's agent layout.
struct VectorPattern {
    Vec v1;  ///< agent 1
    Vec v2;  ///< every other agent

    static VectorPattern uniform(const Vec& v) { return {v, v}; }

    /// Dense stacked vector, for tests and diagnostics.
    [[nodiscard]] Vec dense(int N) const {
        Vec out(N * v1.size());
        out.head(v1.size()) = v1;
        for (int j = 1; j < N; ++j) out.segment(j * v2.size(), v2.size()) = v2;
        return out;
    }
};

inline VectorPattern operator+(const VectorPattern& x, const VectorPattern& y) {
    return {x.v1 + y.v1, x.v2 + y.v2};
}

inline VectorPattern operator*(double s, const VectorPattern& x) { return {s * x.v1, s * x.v2}; }

/// Matrix-vector product of patterned objects with N agents.
inline VectorPattern multiply(const BlockPattern& x, const VectorPattern& v, double N) {
    return {x.a * v.v1 + (N - 1.0) * x.b * v.v2,
            x.c * v.v1 + x.d * v.v2 + (N - 2.0) * x.e * v.v2};
}

}  // namespace mfnash
