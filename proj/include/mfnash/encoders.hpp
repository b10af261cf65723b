// Random-feature (RFN) and echo-state (ESN) latent encoders.
//
// Both map an input x in R^{d_x} to a latent matrix Z in R^{d_y x d_z}. The
// input is tiled into d_z identical columns [x, ..., x] before the affine
// map, and sigma scales a 1 x d_z Gaussian row W into a d_y x d_z noise
// term sigma W:
//     RFN:  Z = relu(A [x..x] + b + sigma W)
//     ESN:  Z = phi(A [x..x] + B Z_prev + b + sigma W)
// The ESN activation phi is the hard sigmoid clamp((x + 3) / 6, 0, 1) by
// default, so phi(0) = 0.5; tanh is available as an option.

#pragma once

#include "mfnash/core.hpp"
#include "mfnash/random.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace mfnash {

enum class Activation { HardSigmoid, Tanh };

inline double hard_sigmoid(double x) { return std::clamp((x + 3.0) / 6.0, 0.0, 1.0); }

inline double apply_activation(Activation a, double x) {
    return a == Activation::Tanh ? std::tanh(x) : hard_sigmoid(x);
}

inline Activation parse_activation(const std::string& name) {
    if (name == "hard_sigmoid") return Activation::HardSigmoid;
    if (name == "tanh") return Activation::Tanh;
    throw EncodeError("unknown activation '" + name + "'");
}

inline std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "hard_sigmoid"; }

struct RfnParams {
    Mat A;      ///< d_y x d_x
    Mat b;      ///< d_y x d_z
    Vec sigma;  ///< d_y noise scale
};

struct EsnParams {
    Mat A;      ///< d_y x d_x
    Mat B;      ///< d_y x d_y recurrence
    Mat b;      ///< d_y x d_z
    Vec sigma;  ///< d_y noise scale
    Activation activation{Activation::HardSigmoid};
};

namespace detail {

inline Mat affine_part(const Vec& x, const Mat& A, const Mat& b, const Vec& sigma,
                       const Eigen::RowVectorXd& noise) {
    if (A.cols() != x.size()) throw EncodeError("encoder: A has " + std::to_string(A.cols()) +
                                                " columns but x has size " + std::to_string(x.size()));
    if (b.rows() != A.rows()) throw EncodeError("encoder: b and A disagree on d_y");
    if (sigma.size() != A.rows()) throw EncodeError("encoder: sigma must have d_y entries");
    if (noise.size() != b.cols()) throw EncodeError("encoder: noise must have d_z entries");
    const Vec Ax = A * x;
    return Ax.replicate(1, b.cols()) + b + sigma * noise;
}

}  // namespace detail

/// Z = relu(A [x..x] + b + sigma noise).
inline Mat rfn_encode(const Vec& x, const RfnParams& p, const Eigen::RowVectorXd& noise) {
    return detail::affine_part(x, p.A, p.b, p.sigma, noise).cwiseMax(0.0);
}

/// Z = phi(A [x..x] + B z_prev + b + sigma noise).
inline Mat esn_encode(const Vec& x, const Mat& z_prev, const EsnParams& p, const Eigen::RowVectorXd& noise) {
    if (p.B.rows() != p.A.rows() || p.B.cols() != p.A.rows())
        throw EncodeError("esn: B must be d_y x d_y");
    if (z_prev.rows() != p.b.rows() || z_prev.cols() != p.b.cols())
        throw EncodeError("esn: z_prev must be d_y x d_z");
    if (!z_prev.allFinite()) throw EncodeError("esn: z_prev is not finite");
    Mat pre = detail::affine_part(x, p.A, p.b, p.sigma, noise) + p.B * z_prev;
    return pre.unaryExpr([a = p.activation](double v) { return apply_activation(a, v); });
}

/// Standard-normal RFN parameters with uniform noise scale sigma.
inline RfnParams sample_rfn(int dim_y, int dim_x, int dim_z, double sigma, std::mt19937_64& rng) {
    RfnParams p;
    p.A = gaussian_matrix(dim_y, dim_x, rng);
    p.b = gaussian_matrix(dim_y, dim_z, rng);
    p.sigma = Vec::Constant(dim_y, sigma);
    return p;
}

/// Standard-normal ESN parameters; B is rescaled to spectral norm `recurrence_scale`.
inline EsnParams sample_esn(int dim_y, int dim_x, int dim_z, double sigma, Activation act,
                            std::mt19937_64& rng, double recurrence_scale = 0.9) {
    EsnParams p;
    p.A = gaussian_matrix(dim_y, dim_x, rng);
    p.B = gaussian_matrix(dim_y, dim_y, rng);
    const double norm = p.B.operatorNorm();
    if (norm > 0.0) p.B *= recurrence_scale / norm;
    p.b = gaussian_matrix(dim_y, dim_z, rng);
    p.sigma = Vec::Constant(dim_y, sigma);
    p.activation = act;
    return p;
}

/// Flattened (A, b) for RFN parameters, column-major.
inline Vec flatten(const RfnParams& p) {
    Vec out(p.A.size() + p.b.size());
    out << p.A.reshaped(), p.b.reshaped();
    return out;
}

/// Flattened (A, B, b) for ESN parameters, column-major.
inline Vec flatten(const EsnParams& p) {
    Vec out(p.A.size() + p.B.size() + p.b.size());
    out << p.A.reshaped(), p.B.reshaped(), p.b.reshaped();
    return out;
}

/// Inverse of flatten, keeping sigma from a template.
inline RfnParams unflatten(const Vec& v, const RfnParams& shape) {
    RfnParams p = shape;
    const auto na = shape.A.size();
    p.A = v.head(na).reshaped(shape.A.rows(), shape.A.cols());
    p.b = v.segment(na, shape.b.size()).reshaped(shape.b.rows(), shape.b.cols());
    return p;
}

inline EsnParams unflatten(const Vec& v, const EsnParams& shape) {
    EsnParams p = shape;
    const auto na = shape.A.size();
    const auto nb = shape.B.size();
    p.A = v.head(na).reshaped(shape.A.rows(), shape.A.cols());
    p.B = v.segment(na, nb).reshaped(shape.B.rows(), shape.B.cols());
    p.b = v.segment(na + nb, shape.b.size()).reshaped(shape.b.rows(), shape.b.cols());
    return p;
}

}  // namespace mfnash
