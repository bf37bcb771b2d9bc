#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "cpd/tps.hpp"

using namespace cpd;

namespace {

using Complex = std::complex<double>;
using Pairs = std::vector<std::pair<Complex, Complex>>;

Complex random_point(std::mt19937_64& rng, double radius) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return std::polar(radius * std::sqrt(u(rng)), 2.0 * std::numbers::pi * u(rng));
}

}  // namespace

TEST_CASE("chi profiles") {
    CHECK(chi(Complex(0)) == Complex(0));
    CHECK(chi_inv(Complex(0)) == Complex(0));
    CHECK(std::abs(chi(Complex(0.5)) - 0.5493061443340549) < 1e-15);
    const Complex w = chi(std::polar(0.5, 1.1));
    CHECK(std::arg(w) == doctest::Approx(1.1));
    CHECK(std::abs(chi(Complex(0.5), ChiProfile::atan) - std::atan(0.5)) < 1e-15);

    std::mt19937_64 rng(1);
    for (int k = 0; k < 1000; ++k) {
        const Complex z = random_point(rng, 1.0 - 1e-6);
        CHECK(std::abs(chi_inv(chi(z)) - z) < 1e-12);
        CHECK(std::abs(chi_inv(chi(z, ChiProfile::atan), ChiProfile::atan) - z) < 1e-12);
    }
    CHECK_THROWS_AS(chi(Complex(1.0)), InputError);
    // The atan range ends at pi/4; anything beyond clamps inside the disk.
    CHECK(std::abs(chi_inv(Complex(5.0), ChiProfile::atan)) < 1.0);
}

TEST_CASE("mutually closest pairs") {
    const std::vector<Complex> a{0.1, Complex(0, 0.4), Complex(-0.3, -0.2)};
    const auto self = mutually_closest_pairs(a, a);
    REQUIRE(self.size() == 3);
    for (const auto& [p, q] : self) CHECK(p == q);

    const auto one = mutually_closest_pairs<double>({0.1}, {0.12, 0.9});
    REQUIRE(one.size() == 1);
    CHECK(one[0].first == Complex(0.1));
    CHECK(one[0].second == Complex(0.12));

    // Equidistant sources: the target is left unpaired.
    CHECK(mutually_closest_pairs<double>({Complex(0.2), Complex(-0.2)}, {Complex(0)}).empty());
    CHECK(mutually_closest_pairs<double>({}, {0.1}).empty());

    // Brute-force check on random sets.
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Complex> s, d;
        for (int i = 0; i < 6; ++i) s.push_back(random_point(rng, 0.8));
        for (int i = 0; i < 5; ++i) d.push_back(random_point(rng, 0.8));
        const auto pairs = mutually_closest_pairs(s, d);
        std::size_t expected = 0;
        for (Complex p : s) {
            Complex best = d[0];
            for (Complex q : d)
                if (hyperbolic_distance(p, q) < hyperbolic_distance(p, best)) best = q;
            Complex back = s[0];
            for (Complex r : s)
                if (hyperbolic_distance(r, best) < hyperbolic_distance(back, best)) back = r;
            if (back == p) ++expected;
        }
        CHECK(pairs.size() == expected);
    }
}

TEST_CASE("fit_tps") {
    SUBCASE("no controls") {
        const TpsMapd m = fit_tps<double>({});
        CHECK(m(Complex(0.3, 0.7)) == Complex(0.3, 0.7));
    }

    SUBCASE("fixed controls give the identity") {
        Pairs p{{0.1, 0.1}, {Complex(0, 0.5), Complex(0, 0.5)}, {-0.4, -0.4}, {Complex(0.2, -0.3), Complex(0.2, -0.3)}};
        const TpsMapd m = fit_tps(p);
        CHECK(std::abs(m.a0) < 1e-10);
        CHECK(std::abs(m.a1 - 1.0) < 1e-10);
        CHECK(std::abs(m.a2) < 1e-10);
        for (Complex b : m.kernel_weights) CHECK(std::abs(b) < 1e-10);
    }

    SUBCASE("common shift is a translation") {
        const Complex c(0.2, -0.1);
        for (int n : {1, 2, 4, 6}) {
            Pairs p;
            for (int i = 0; i < n; ++i) {
                const Complex z = std::polar(0.3 + 0.1 * i, 1.3 * i);
                p.emplace_back(z, z + c);
            }
            const TpsMapd m = fit_tps(p);
            CHECK(std::abs(m.a0 - c) < 1e-10);
            CHECK(std::abs(m.a1 - 1.0) < 1e-10);
            CHECK(std::abs(m.a2) < 1e-10);
            for (Complex b : m.kernel_weights) CHECK(std::abs(b) < 1e-10);
        }
    }

    SUBCASE("interpolation and side conditions") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            Pairs p;
            for (int i = 0; i < 3 + trial % 6; ++i) p.emplace_back(random_point(rng, 2.0), random_point(rng, 2.0));
            const TpsMapd m = fit_tps(p);
            Complex sum = 0, moment = 0, conj_moment = 0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                CHECK(std::abs(m(p[i].first) - p[i].second) < 1e-9);
                sum += m.kernel_weights[i];
                moment += m.kernel_weights[i] * p[i].first;
                conj_moment += m.kernel_weights[i] * std::conj(p[i].first);
            }
            CHECK(std::abs(sum) < 1e-9);
            CHECK(std::abs(moment) < 1e-9);
            CHECK(std::abs(conj_moment) < 1e-9);
        }
    }

    SUBCASE("two pairs: similarity") {
        const TpsMapd m = fit_tps<double>({{0.1, Complex(0.2, 0.1)}, {Complex(0, 0.3), Complex(-0.1, 0.4)}});
        CHECK(std::abs(m(0.1) - Complex(0.2, 0.1)) < 1e-14);
        CHECK(std::abs(m(Complex(0, 0.3)) - Complex(-0.1, 0.4)) < 1e-14);
        CHECK(m.a2 == Complex(0));
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(fit_tps<double>({{0.1, 0.2}, {0.1, 0.3}}), NumericalError);
        // Collinear controls leave the conj(z) coefficient undetermined.
        CHECK_THROWS_AS(fit_tps<double>({{0.0, 0.0}, {0.5, 0.4}, {1.0, 1.1}}), NumericalError);
    }
}

TEST_CASE("zeta through the chi sandwich") {
    CHECK(std::abs(apply_zeta(TpsMapd::identity(), Complex(0.4, -0.3)) - Complex(0.4, -0.3)) < 1e-15);

    std::mt19937_64 rng(4);
    Pairs disk;
    for (int i = 0; i < 5; ++i) disk.emplace_back(random_point(rng, 0.8), random_point(rng, 0.8));
    Pairs planar;
    for (const auto& [p, q] : disk) planar.emplace_back(chi(p), chi(q));
    const TpsMapd m = fit_tps(planar);
    for (const auto& [p, q] : disk) CHECK(std::abs(apply_zeta(m, p) - q) < 1e-8);

    const TpsMapd shift = fit_tps<double>({{0.0, Complex(0.7, 0.2)}});
    double largest = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const Complex z = random_point(rng, 1.0);
        largest = std::max({largest, std::abs(apply_zeta(m, z)), std::abs(apply_zeta(shift, z))});
    }
    CHECK(largest <= 1.0 + 1e-9);

    // Continuity up to the circle: the boundary value is the radial limit.
    for (double t : {0.0, 1.0, 2.5, 4.0}) {
        const Complex u = std::polar(1.0, t);
        const Complex on = apply_zeta(m, u);
        CHECK(std::abs(std::abs(on) - 1.0) < 1e-12);
        // The kernel sum only grows like log r in the plane, so the circle
        // value is the direction of the planar map far out along the ray.
        double previous = std::numeric_limits<double>::infinity();
        for (double R : {1e2, 1e3, 1e4, 1e5}) {
            const Complex far = m(R * u);
            const double err = std::abs(far / std::abs(far) - on);
            CHECK(err < previous);
            previous = err;
        }
        CHECK(previous < 1e-3);
    }

    // The atan profile stays in the closed disk after clamping.
    const TpsMapd big = fit_tps<double>({{0.0, Complex(2.0, 0.0)}});
    CHECK(std::abs(apply_zeta(big, Complex(0.3, 0.1), ChiProfile::atan)) < 1.0);
}

TEST_CASE("zeta is Lipschitz on a grid") {
    std::mt19937_64 rng(5);
    Pairs planar;
    for (int i = 0; i < 4; ++i) planar.emplace_back(chi(random_point(rng, 0.7)), chi(random_point(rng, 0.7)));
    const TpsMapd m = fit_tps(planar);

    auto lipschitz = [&](int n) {
        double best = 0.0;
        for (int i = -n; i <= n; ++i)
            for (int j = -n; j <= n; ++j) {
                const Complex z(0.9 * i / n, 0.9 * j / n), dz(0.9 / n, 0.0), dw(0.0, 0.9 / n);
                if (std::abs(z) > 0.9 || std::abs(z + dz) > 0.9 || std::abs(z + dw) > 0.9) continue;
                best = std::max(best, std::abs(apply_zeta(m, z + dz) - apply_zeta(m, z)) / std::abs(dz));
                best = std::max(best, std::abs(apply_zeta(m, z + dw) - apply_zeta(m, z)) / std::abs(dw));
            }
        return best;
    };
    const double coarse = lipschitz(20), fine = lipschitz(40);
    CHECK(std::isfinite(coarse));
    CHECK(fine == doctest::Approx(coarse).epsilon(0.25));
}

TEST_CASE("injectivity check on a grid") {
    CHECK(zeta_flipped_cells(TpsMapd::identity()) == 0);
    std::mt19937_64 rng(6);
    Pairs planar;
    for (int i = 0; i < 4; ++i) planar.emplace_back(chi(random_point(rng, 0.5)), chi(random_point(rng, 0.5)));
    const TpsMapd m = fit_tps(planar);
    CHECK(zeta_flipped_cells(m) >= 0);

    // |a2| > |a1| reverses orientation everywhere.
    TpsMapd fold = TpsMapd::identity();
    fold.a1 = 0.2;
    fold.a2 = 1.0;
    CHECK(zeta_flipped_cells(fold) > 0);
}
