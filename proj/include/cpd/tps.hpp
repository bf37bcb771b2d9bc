#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "cpd/errors.hpp"
#include "cpd/mobius.hpp"

namespace cpd {

/// Radial profile of the disk-to-plane change of coordinates.
/// atanh: unit disk onto the whole plane (default).
/// atan: unit disk onto the disk of radius pi/4, inverse clamped radially.
enum class ChiProfile { atanh, atan };

template <typename Scalar>
std::complex<Scalar> chi(std::complex<Scalar> z, ChiProfile profile = ChiProfile::atanh) {
    const Scalar r = std::abs(z);
    if (profile == ChiProfile::atanh && !(r < Scalar(1)))
        throw InputError("outside_disk", "chi is defined on the open unit disk");
    if (r == Scalar(0)) return z;
    const Scalar s = profile == ChiProfile::atanh ? std::atanh(r) : std::atan(r);
    return z * (s / r);
}

template <typename Scalar>
std::complex<Scalar> chi_inv(std::complex<Scalar> w, ChiProfile profile = ChiProfile::atanh) {
    const Scalar r = std::abs(w);
    if (r == Scalar(0)) return w;
    Scalar s;
    if (profile == ChiProfile::atanh) {
        s = std::tanh(r);
    } else {
        // tan is only a bijection back onto the disk on [0, pi/4]; clamp
        // the result radially just inside the unit circle.
        const Scalar limit = Scalar(1) - Scalar(1e-9);
        s = r >= std::numbers::pi_v<Scalar> / Scalar(2) ? limit : std::min(std::tan(r), limit);
    }
    std::complex<Scalar> out = w * (s / r);
    // Rounding may push |out| an ulp past the circle.
    while (std::abs(out) > Scalar(1)) out *= Scalar(1) - std::numeric_limits<Scalar>::epsilon();
    return out;
}

/// Thin-plate spline kernel r^2 log r with the removable zero at r = 0.
template <typename Scalar>
Scalar tps_kernel(Scalar r) {
    return r > Scalar(0) ? r * r * std::log(r) : Scalar(0);
}

/// TPS(z) = a0 + a1 z + a2 conj(z) + sum_i b_i U(|z - P_i|).
template <typename Scalar>
struct TpsMap {
    using Complex = std::complex<Scalar>;

    std::vector<Complex> control_src;
    std::vector<Complex> control_dst;
    Complex a0{0}, a1{1}, a2{0};
    std::vector<Complex> kernel_weights;

    static TpsMap identity() { return {}; }

    Complex operator()(Complex z) const {
        Complex out = a0 + a1 * z + a2 * std::conj(z);
        for (std::size_t i = 0; i < control_src.size(); ++i)
            out += kernel_weights[i] * tps_kernel(std::abs(z - control_src[i]));
        return out;
    }
};

using TpsMapd = TpsMap<double>;

/// Interpolating thin-plate spline through (P_j, Q_j).
///
/// n = 0 gives the identity, n = 1 a translation, n = 2 the similarity
/// a0 + a1 z through both pairs (the bending-free interpolant). For n >= 3
/// the standard (n+3) x (n+3) system is solved; a reciprocal condition
/// estimate below 1e-12 throws NumericalError "ill_conditioned_tps".
template <typename Scalar>
TpsMap<Scalar> fit_tps(const std::vector<std::pair<std::complex<Scalar>, std::complex<Scalar>>>& pairs) {
    using Complex = std::complex<Scalar>;
    TpsMap<Scalar> map;
    const int n = static_cast<int>(pairs.size());
    for (const auto& [p, q] : pairs) {
        map.control_src.push_back(p);
        map.control_dst.push_back(q);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (map.control_src[i] == map.control_src[j])
                throw NumericalError("singular_tps", "coincident TPS source controls");

    if (n == 0) return map;
    if (n == 1) {
        map.a0 = pairs[0].second - pairs[0].first;
        map.kernel_weights.assign(1, Complex(0));
        return map;
    }
    if (n == 2) {
        const auto& [p0, q0] = pairs[0];
        const auto& [p1, q1] = pairs[1];
        map.a1 = (q1 - q0) / (p1 - p0);
        map.a0 = q0 - map.a1 * p0;
        map.kernel_weights.assign(2, Complex(0));
        return map;
    }

    using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
    Matrix A = Matrix::Zero(n + 3, n + 3);
    Vector rhs = Vector::Zero(n + 3);
    for (int i = 0; i < n; ++i) {
        const Complex p = map.control_src[i];
        for (int j = 0; j < n; ++j) A(i, j) = tps_kernel(std::abs(p - map.control_src[j]));
        A(i, n) = A(n, i) = Complex(1);
        A(i, n + 1) = A(n + 1, i) = p;
        A(i, n + 2) = A(n + 2, i) = std::conj(p);
        rhs[i] = map.control_dst[i];
    }
    Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible() || lu.rcond() < Scalar(1e-12))
        throw NumericalError("ill_conditioned_tps", "TPS system is singular or ill-conditioned");
    const Vector sol = lu.solve(rhs);
    map.kernel_weights.assign(sol.data(), sol.data() + n);
    map.a0 = sol[n];
    map.a1 = sol[n + 1];
    map.a2 = sol[n + 2];
    return map;
}

/// zeta(z) = chi^{-1}(TPS(chi(z))).
template <typename Scalar>
std::complex<Scalar> apply_zeta(const TpsMap<Scalar>& map, std::complex<Scalar> z,
                                ChiProfile profile = ChiProfile::atanh) {
    const Scalar r = std::abs(z);
    if (profile == ChiProfile::atanh && r >= Scalar(1) - Scalar(1e-15)) {
        // chi sends the circle to infinity. With the side conditions the
        // kernel sum grows like log r, so the direction of the affine part
        // gives the limit on the circle.
        const std::complex<Scalar> u = z / r;
        const std::complex<Scalar> w = map.a1 * u + map.a2 * std::conj(u);
        return std::abs(w) > Scalar(0) ? w / std::abs(w) : u;
    }
    return chi_inv(map(chi(z, profile)), profile);
}

/// Number of grid triangles inside |z| <= 0.95 that zeta maps with
/// non-positive orientation. The grid has n cells per side of [-1, 1]^2.
template <typename Scalar>
int zeta_flipped_cells(const TpsMap<Scalar>& map, ChiProfile profile = ChiProfile::atanh, int n = 32) {
    using C = std::complex<Scalar>;
    const Scalar step = Scalar(2) / Scalar(n), radius = Scalar(0.95);
    auto node = [&](int i, int j) { return C(Scalar(-1) + step * Scalar(i), Scalar(-1) + step * Scalar(j)); };
    auto flipped = [&](C a, C b, C c) {
        if (std::abs(a) > radius || std::abs(b) > radius || std::abs(c) > radius) return false;
        const C fa = apply_zeta(map, a, profile), fb = apply_zeta(map, b, profile), fc = apply_zeta(map, c, profile);
        return std::imag(std::conj(fb - fa) * (fc - fa)) <= Scalar(0);
    };
    int count = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const C a = node(i, j), b = node(i + 1, j), c = node(i + 1, j + 1), d = node(i, j + 1);
            count += flipped(a, b, c) + flipped(a, c, d);
        }
    return count;
}

/// Pairs (p, q) that are each other's unique hyperbolic-nearest neighbor.
template <typename Scalar>
std::vector<std::pair<std::complex<Scalar>, std::complex<Scalar>>> mutually_closest_pairs(
    const std::vector<std::complex<Scalar>>& src, const std::vector<std::complex<Scalar>>& dst) {
    const std::size_t ns = src.size(), nd = dst.size();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> D(ns, nd);
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < nd; ++j) D(i, j) = hyperbolic_distance(src[i], dst[j]);

    std::vector<std::pair<std::complex<Scalar>, std::complex<Scalar>>> out;
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < nd; ++j) {
            const Scalar d = D(i, j);
            bool strict = true;
            for (std::size_t k = 0; k < nd && strict; ++k) strict = k == j || d < D(i, k);
            for (std::size_t k = 0; k < ns && strict; ++k) strict = k == i || d < D(k, j);
            if (strict) out.emplace_back(src[i], dst[j]);
        }
    return out;
}

}  // namespace cpd
