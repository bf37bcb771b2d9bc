#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "cpd/errors.hpp"

namespace cpd {

enum class Orientation { preserving, reversing };

inline Orientation operator*(Orientation a, Orientation b) {
    return a == b ? Orientation::preserving : Orientation::reversing;
}

/// Disk automorphism m(z) = e^{i theta} (z - a) / (1 - conj(a) z), or its
/// anti-conformal counterpart m(conj(z)) when orientation is reversing.
template <typename Scalar>
class Mobius {
public:
    using Complex = std::complex<Scalar>;
    using Matrix2 = Eigen::Matrix<Complex, 2, 2>;

    Mobius() = default;

    Mobius(Scalar theta, Complex a, Orientation orientation = Orientation::preserving)
        : theta_(wrap(theta)), a_(a), orientation_(orientation) {
        if (!(std::abs(a) < Scalar(1))) throw InputError("bad_mobius", "Mobius parameter |a| must be < 1");
    }

    static Mobius identity() { return {}; }

    /// Recovers (theta, a) from a coefficient matrix [[alpha, beta], [gamma, delta]].
    static Mobius from_matrix(const Matrix2& M, Orientation orientation) {
        const Complex alpha = M(0, 0), beta = M(0, 1), delta = M(1, 1);
        Complex a = -beta / alpha;
        // Round-off can push |a| to 1 only for wildly non-normal inputs; clamp inside.
        const Scalar r = std::abs(a);
        if (r >= Scalar(1)) a *= (Scalar(1) - std::numeric_limits<Scalar>::epsilon()) / r;
        return Mobius(std::arg(alpha / delta), a, orientation);
    }

    Scalar theta() const { return theta_; }
    Complex a() const { return a_; }
    Orientation orientation() const { return orientation_; }
    bool reversing() const { return orientation_ == Orientation::reversing; }

    Matrix2 matrix() const {
        const Complex rot = std::polar(Scalar(1), theta_);
        Matrix2 M;
        M << rot, -rot * a_, -std::conj(a_), Complex(1);
        return M;
    }

    Complex operator()(Complex z) const {
        if (reversing()) z = std::conj(z);
        return std::polar(Scalar(1), theta_) * (z - a_) / (Scalar(1) - z * std::conj(a_));
    }

    /// |m'(z)|^2 = ((1 - |a|^2) / |1 - z conj(a)|^2)^2.
    Scalar derivative_modulus_sq(Complex z) const {
        if (reversing()) z = std::conj(z);
        const Scalar num = Scalar(1) - std::norm(a_);
        const Scalar den = std::norm(Scalar(1) - z * std::conj(a_));
        return (num / den) * (num / den);
    }

    Mobius inverse() const {
        const Matrix2 inv = matrix().inverse();
        return from_matrix(reversing() ? Matrix2(inv.conjugate()) : inv, orientation_);
    }

    /// (*this) after `inner`.
    Mobius operator*(const Mobius& inner) const {
        const Matrix2 rhs = reversing() ? Matrix2(inner.matrix().conjugate()) : inner.matrix();
        return from_matrix(matrix() * rhs, orientation_ * inner.orientation_);
    }

    /// Hyperbolic translation taking 0 to c: z -> (z + c) / (1 + conj(c) z).
    static Mobius translation_from_origin(Complex c) { return Mobius(Scalar(0), -c); }

private:
    static Scalar wrap(Scalar theta) {
        constexpr Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
        Scalar t = std::fmod(theta, two_pi);
        if (t < Scalar(0)) t += two_pi;
        if (t >= two_pi) t -= two_pi;
        return t;
    }

    Scalar theta_ = 0;
    Complex a_ = 0;
    Orientation orientation_ = Orientation::preserving;
};

using Mobiusd = Mobius<double>;

/// The transform with m(p) = q whose remaining rotational freedom is `theta`:
/// m = T_q o R_theta o T_p^{-1} with T_c the hyperbolic translation 0 -> c.
/// For reversing orientation the point p is conjugated first, so m(p) = q
/// still holds.
template <typename Scalar>
Mobius<Scalar> from_point_angle(std::complex<Scalar> p, std::complex<Scalar> q, Scalar theta,
                                Orientation orientation = Orientation::preserving) {
    if (!(std::abs(p) < Scalar(1)) || !(std::abs(q) < Scalar(1)))
        throw InputError("outside_disk", "from_point_angle needs |p|, |q| < 1");
    using M = Mobius<Scalar>;
    const std::complex<Scalar> source = orientation == Orientation::reversing ? std::conj(p) : p;
    const M to_origin = M::translation_from_origin(source).inverse();
    const M rot(theta, std::complex<Scalar>(0));
    const M conformal = M::translation_from_origin(q) * rot * to_origin;
    if (orientation == Orientation::preserving) return conformal;
    return M(conformal.theta(), conformal.a(), Orientation::reversing);
}

/// d_H(p, q) = atanh |(p - q) / (1 - p conj(q))|.
template <typename Scalar>
Scalar hyperbolic_distance(std::complex<Scalar> p, std::complex<Scalar> q) {
    if (!(std::abs(p) < Scalar(1)) || !(std::abs(q) < Scalar(1)))
        throw InputError("outside_disk", "hyperbolic distance needs points strictly inside the disk");
    const Scalar r = std::abs((p - q) / (Scalar(1) - p * std::conj(q)));
    return std::atanh(std::min(r, Scalar(1) - std::numeric_limits<Scalar>::epsilon()));
}

struct ExtremaSet;

/// One Mobius candidate with the data that generated it.
struct Candidate {
    Mobiusd map;
    std::complex<double> source;  // p in the source disk
    std::complex<double> target;  // q in the target disk
    int angle_index = 0;
};

struct CandidateSet {
    std::vector<Candidate> candidates;
    /// An extrema set was empty; candidates are anchored at the disk centers.
    bool fallback = false;
};

/// All maps m(p) = q for (p, q) in I_M x I_N, theta = 2 pi k / K, both
/// orientations, deduplicated at 1e-8 in (theta, Re a, Im a).
CandidateSet candidate_set(const ExtremaSet& source, const ExtremaSet& target, int angles);

}  // namespace cpd
