#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

#include "cpd/errors.hpp"
#include "cpd/mesh.hpp"

namespace cpd {

/// x -> U x + t with U orthogonal (det +1 or -1).
template <typename Scalar>
struct RigidMotion {
    using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
    using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

    Matrix3 U = Matrix3::Identity();
    Vector3 t = Vector3::Zero();

    static RigidMotion identity() { return {}; }

    Vector3 operator()(const Vector3& x) const { return U * x + t; }

    /// Applies the motion to every row of an n x 3 matrix.
    template <typename Derived>
    Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor> apply_rows(const Eigen::MatrixBase<Derived>& X) const {
        return (X * U.transpose()).rowwise() + t.transpose();
    }

    RigidMotion inverse() const { return {U.transpose(), -(U.transpose() * t)}; }

    /// (*this) after `other`.
    RigidMotion operator*(const RigidMotion& other) const { return {U * other.U, U * other.t + t}; }

    bool is_reflection() const { return U.determinant() < Scalar(0); }
};

using RigidMotiond = RigidMotion<double>;

/// Ordered point list with optional weights. Empty weights mean uniform.
template <typename Scalar>
struct PointSequence {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor> points;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

    Eigen::Index size() const { return points.rows(); }

    /// Weights normalized to sum to one.
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> normalized_weights() const {
        if (weights.size() == 0)
            return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Constant(points.rows(), Scalar(1) / Scalar(points.rows()));
        if (weights.size() != points.rows()) throw InputError("weight_mismatch", "weight count differs from point count");
        if ((weights.array() <= Scalar(0)).any()) throw InputError("bad_weights", "weights must be positive");
        return weights / weights.sum();
    }
};

using PointSequenced = PointSequence<double>;

template <typename Scalar>
struct RigidFit {
    RigidMotion<Scalar> motion;
    /// sum_i w_i |R x_i - y_i|^2 with the weights as given (not renormalized).
    Scalar residual_sq = 0;
    /// Cross-covariance rank deficient: the returned U is one of several maximizers.
    bool degenerate = false;
};

namespace detail {

template <typename Scalar, typename DX, typename DY, typename DW>
RigidFit<Scalar> weighted_rigid_fit(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y,
                                    const Eigen::MatrixBase<DW>& w) {
    using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
    using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
    if (X.rows() != Y.rows() || X.rows() != w.size() || X.rows() == 0)
        throw InputError("length_mismatch", "rigid fit needs equal, non-empty sequences");

    const Scalar total = w.sum();
    const Vector3 xbar = (X.transpose() * w) / total;
    const Vector3 ybar = (Y.transpose() * w) / total;
    const auto Xc = X.rowwise() - xbar.transpose();
    const auto Yc = Y.rowwise() - ybar.transpose();
    const Matrix3 cov = Xc.transpose() * w.asDiagonal() * Yc;

    // cov = Q S W^T, U* = W Q^T. No determinant fix: reflections are allowed.
    Eigen::JacobiSVD<Matrix3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    RigidFit<Scalar> fit;
    fit.motion.U = svd.matrixV() * svd.matrixU().transpose();
    fit.motion.t = ybar - fit.motion.U * xbar;

    const auto& s = svd.singularValues();
    const Scalar tiny = Scalar(1e-12) * std::max(s(0), std::numeric_limits<Scalar>::min());
    fit.degenerate = s(0) <= std::numeric_limits<Scalar>::min() || s(2) <= tiny;

    const auto resid = (X * fit.motion.U.transpose()).rowwise() + fit.motion.t.transpose() - Y;
    fit.residual_sq = (resid.rowwise().squaredNorm().transpose() * w).value();
    return fit;
}

}  // namespace detail

/// Centroid size [sum w_i |x_i - xbar|^2]^(1/2), weights normalized to one.
template <typename Scalar>
Scalar centroid_size(const PointSequence<Scalar>& X) {
    if (X.size() == 0) throw InputError("empty_sequence", "centroid_size of an empty sequence");
    const auto w = X.normalized_weights();
    const Eigen::Matrix<Scalar, 3, 1> xbar = X.points.transpose() * w;
    const auto centered = X.points.rowwise() - xbar.transpose();
    const Scalar s = std::sqrt((centered.rowwise().squaredNorm().transpose() * w).value());
    if (!(s > Scalar(0))) throw InputError("zero_centroid_size", "all points coincide");
    return s;
}

/// Weighted least-squares rigid motion (reflections allowed) taking X onto Y.
template <typename Scalar>
RigidFit<Scalar> optimal_rigid(const PointSequence<Scalar>& X, const PointSequence<Scalar>& Y) {
    if (X.size() != Y.size()) throw InputError("length_mismatch", "sequences differ in length");
    const auto w = X.normalized_weights();
    if (Y.weights.size() != 0 && !Y.normalized_weights().isApprox(w, Scalar(1e-12)))
        throw InputError("weight_mismatch", "sequences carry different weights");
    return detail::weighted_rigid_fit<Scalar>(X.points, Y.points, w);
}

template <typename Scalar>
struct ProcrustesResult {
    Scalar distance = 0;
    /// Acts on the centered, size-normalized copy of X.
    RigidMotion<Scalar> motion;
    bool degenerate = false;
};

/// Classical Procrustes distance: both sequences centered and scaled to unit
/// centroid size, then the minimal residual over rigid motions.
template <typename Scalar>
ProcrustesResult<Scalar> discrete_procrustes(const PointSequence<Scalar>& X, const PointSequence<Scalar>& Y) {
    if (X.size() != Y.size()) throw InputError("length_mismatch", "sequences differ in length");
    const auto w = X.normalized_weights();
    const auto normalize = [&](const PointSequence<Scalar>& S) {
        const Eigen::Matrix<Scalar, 3, 1> c = S.points.transpose() * w;
        const Scalar size = centroid_size(PointSequence<Scalar>{S.points, w});
        return Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>((S.points.rowwise() - c.transpose()) / size);
    };
    const auto fit = detail::weighted_rigid_fit<Scalar>(normalize(X), normalize(Y), w);
    return {std::sqrt(std::max(fit.residual_sq, Scalar(0))), fit.motion, fit.degenerate};
}

struct EnergyResult {
    double dpc = 0.0;
    RigidMotiond motion;
    bool degenerate = false;
};

/// Continuous Procrustes energy of a sampled correspondence, integrated with
/// the rectangle rule: [min_R sum_l A_l |R q_l - C q_l|^2]^(1/2).
EnergyResult procrustes_energy(const TriangleMesh& mesh, const SamplingSet& samples,
                               const Eigen::Ref<const Vertices>& images);

}  // namespace cpd
