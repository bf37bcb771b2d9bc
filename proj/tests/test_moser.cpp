#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "cpd/moser.hpp"
#include "cpd/pipeline.hpp"

using namespace cpd;

namespace {

constexpr double kPi = std::numbers::pi;

std::string error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

int euler_characteristic(const DiskFEMesh& m) {
    std::set<std::pair<int, int>> edges;
    for (int f = 0; f < m.face_count(); ++f)
        for (int k = 0; k < 3; ++k) {
            const int a = m.faces(f, k), b = m.faces(f, (k + 1) % 3);
            edges.emplace(std::min(a, b), std::max(a, b));
        }
    return m.vertex_count() - static_cast<int>(edges.size()) + m.face_count();
}

Complex vertex(const DiskFEMesh& m, int v) { return {m.vertices(v, 0), m.vertices(v, 1)}; }

// Manufactured Neumann problem: a = x (x^2 + y^2) - 3x has zero radial
// derivative on the unit circle and lap(a) = 8x.
double exact_potential(Complex z) { return z.real() * std::norm(z) - 3.0 * z.real(); }

double potential_error(double h) {
    const DiskFEMesh m = build_disk_mesh(h);
    Eigen::VectorXd rhs(m.face_count());
    for (int f = 0; f < m.face_count(); ++f) rhs[f] = 8.0 * m.centroid(f).real();
    const FlowField field = solve_neumann_poisson(m, rhs);
    // Both have zero mean up to quadrature; compare after removing the mean.
    Eigen::VectorXd exact(m.vertex_count()), mass = Eigen::VectorXd::Zero(m.vertex_count());
    for (int v = 0; v < m.vertex_count(); ++v) exact[v] = exact_potential(vertex(m, v));
    for (int f = 0; f < m.face_count(); ++f)
        for (int k = 0; k < 3; ++k) mass[m.faces(f, k)] += m.areas[f] / 3.0;
    Eigen::VectorXd diff = field.potential - exact;
    diff.array() -= diff.dot(mass) / mass.sum();
    return std::sqrt(diff.cwiseAbs2().dot(mass));
}

}  // namespace

TEST_CASE("disk FE mesh") {
    const DiskFEMesh coarse = build_disk_mesh(0.5);
    CHECK(coarse.face_count() >= 12);
    CHECK(euler_characteristic(coarse) == 1);

    for (double h : {0.2, 0.1, 0.05}) {
        const DiskFEMesh m = build_disk_mesh(h);
        CHECK(euler_characteristic(m) == 1);
        CHECK(std::abs(m.areas.sum() - kPi) <= 2.0 * h * h * kPi);
        CHECK(m.areas.minCoeff() > 0.0);
        CHECK(m.max_edge_length() / m.min_edge_length() < 4.0);
        int on_circle = 0;
        for (int v = 0; v < m.vertex_count(); ++v) {
            if (!m.boundary[v]) continue;
            ++on_circle;
            CHECK(std::abs(std::abs(vertex(m, v)) - 1.0) < 1e-9);
        }
        CHECK(on_circle > 0);
    }

    const double ratio = build_disk_mesh(0.05).max_edge_length() / build_disk_mesh(0.1).max_edge_length();
    CHECK(ratio == doctest::Approx(0.5).epsilon(0.15));

    CHECK(error_code([] { build_disk_mesh(0.0); }) == "bad_mesh_size");
    CHECK(error_code([] { build_disk_mesh(1.0); }) == "bad_mesh_size");
    CHECK(error_code([] { build_disk_mesh(1e-4); }) == "mesh_too_fine");
}

TEST_CASE("density resampling") {
    const DiskFEMesh m = build_disk_mesh(0.1);
    const ElementDensity c = resample_density([](Complex) { return 1.0 / kPi; }, m, 1e-6);
    CHECK(c.mass(m) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.values.maxCoeff() - c.values.minCoeff() < 1e-14);
    CHECK(c.values[0] == doctest::Approx(1.0 / kPi).epsilon(2e-2));

    const double floor = 1e-3;
    const ElementDensity half = resample_density([](Complex z) { return z.real() < 0.0 ? 0.0 : 1.0; }, m, floor);
    CHECK(half.mass(m) == doctest::Approx(1.0).epsilon(1e-12));
    const double scale = half.values.maxCoeff();
    for (int f = 0; f < m.face_count(); ++f) {
        const double expected = m.centroid(f).real() < 0.0 ? floor : 1.0;
        CHECK(half.values[f] == doctest::Approx(expected * scale));
    }
    CHECK(half.values.minCoeff() > 0.0);
}

TEST_CASE("Neumann Poisson") {
    const DiskFEMesh m = build_disk_mesh(0.1);
    const ElementDensity mu = resample_density([](Complex z) { return 1.0 + z.real(); }, m, 1e-3);

    const FlowField zero = solve_neumann_poisson(m, mu.values - mu.values);
    CHECK(zero.potential.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.nodal_velocity.cwiseAbs().maxCoeff() == 0.0);

    // Adding a constant to the rhs changes nothing: it is projected away.
    const FlowField a = solve_neumann_poisson(m, mu.values);
    const FlowField b = solve_neumann_poisson(m, (mu.values.array() + 3.0).matrix());
    CHECK((a.potential - b.potential).cwiseAbs().maxCoeff() < 1e-12);

    // Recovered gradient is tangential on the circle.
    for (int v = 0; v < m.vertex_count(); ++v) {
        if (!m.boundary[v]) continue;
        const Eigen::RowVector2d n = m.vertices.row(v);
        CHECK(std::abs(a.nodal_velocity.row(v).dot(n)) <= 1e-12 * std::max(1.0, a.nodal_velocity.row(v).norm()));
    }

    SUBCASE("manufactured solution converges at second order") {
        const double e1 = potential_error(0.1), e2 = potential_error(0.05), e3 = potential_error(0.025);
        CHECK(e1 < 0.05);
        CHECK(e1 / e2 > 3.0);
        CHECK(e2 / e3 > 3.0);
    }

    SUBCASE("recovered gradient matches the exact one") {
        const DiskFEMesh fine = build_disk_mesh(0.05);
        Eigen::VectorXd rhs(fine.face_count());
        for (int f = 0; f < fine.face_count(); ++f) rhs[f] = 8.0 * fine.centroid(f).real();
        const FlowField field = solve_neumann_poisson(fine, rhs);
        double worst = 0.0;
        for (int v = 0; v < fine.vertex_count(); ++v) {
            const Complex z = vertex(fine, v);
            const Eigen::RowVector2d g(3.0 * z.real() * z.real() + z.imag() * z.imag() - 3.0, 2.0 * z.real() * z.imag());
            worst = std::max(worst, (field.nodal_velocity.row(v) - g).norm());
        }
        CHECK(worst < 0.05);
    }

    CHECK(error_code([&] { solve_neumann_poisson(m, Eigen::VectorXd::Zero(3)); }) == "rhs_mismatch");
}

TEST_CASE("Moser flow") {
    const DiskFEMesh m = build_disk_mesh(0.03);
    const double floor = 1e-3 / kPi;

    SUBCASE("equal densities give the identity") {
        const ElementDensity mu = resample_density([](Complex z) { return 1.0 + 0.5 * z.real(); }, m, floor);
        const MoserResult r = moser_map(mu, mu, m, 32);
        CHECK((r.images - m.vertices).cwiseAbs().maxCoeff() == 0.0);
        CHECK(r.area_residual < 1e-10);
        CHECK(r.flipped == 0);
    }

    SUBCASE("radial densities against a mass-matching oracle") {
        // mu ~ 1 + r^2, nu ~ 2 - r^2. A radial flow conserves the mass inside
        // each circle, so r1 solves F_nu(r1) = F_mu(r0) in closed form.
        const DiskFEMesh g = build_disk_mesh(0.02);
        const ElementDensity mu = resample_density([](Complex z) { return 1.0 + std::norm(z); }, g, floor);
        const ElementDensity nu = resample_density([](Complex z) { return 2.0 - std::norm(z); }, g, floor);
        const MoserFlow flow(g, solve_neumann_poisson(g, mu.values - nu.values), mu, nu);
        for (double r0 : {0.2, 0.45, 0.7, 0.9}) {
            const double c = r0 * r0 / 2.0 + std::pow(r0, 4) / 4.0;
            const double r1 = std::sqrt(2.0 * (1.0 - std::sqrt(1.0 - c)));
            for (double t : {0.3, 2.0, 4.4}) {
                const Complex w = flow_point(flow, std::polar(r0, t), 32);
                CHECK(std::abs(std::abs(w) - r1) < 1e-3);
                CHECK(std::abs(std::arg(w / std::polar(1.0, t))) < 1e-3);
            }
        }
    }

    const ElementDensity mu = resample_density([](Complex z) { return 1.0 + 0.5 * z.real() + 0.3 * std::norm(z); }, m, floor);
    const ElementDensity nu = resample_density(
        [](Complex z) { return 1.0 + 0.4 * std::exp(-std::norm(z - Complex(0.2, 0.3)) / 0.1); }, m, floor);

    SUBCASE("boundary stays on the circle") {
        const MoserFlow flow(m, solve_neumann_poisson(m, mu.values - nu.values), mu, nu);
        CHECK(!flow.trivial());
        for (int k = 0; k < 50; ++k) {
            const Complex w = flow_point(flow, std::polar(1.0, 2.0 * kPi * k / 50), 32);
            CHECK(std::abs(std::abs(w) - 1.0) < 1e-6);
        }
    }

    SUBCASE("push-forward mass by Voronoi cell") {
        const MoserResult r = moser_map(mu, nu, m, 32);
        CHECK(r.flipped == 0);
        for (int v = 0; v < m.vertex_count(); ++v)
            if (m.boundary[v]) CHECK(std::abs(std::hypot(r.images(v, 0), r.images(v, 1)) - 1.0) < 1e-6);

        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(-0.7, 0.7);
        std::vector<Complex> seeds;
        while (seeds.size() < 10) {
            const Complex z(u(rng), u(rng));
            if (std::abs(z) < 0.8) seeds.push_back(z);
        }
        auto cell = [&](Complex z) {
            int best = 0;
            for (int i = 1; i < 10; ++i)
                if (std::abs(z - seeds[i]) < std::abs(z - seeds[best])) best = i;
            return best;
        };
        // Source mass of each cell against target mass over the images of
        // the same elements.
        Eigen::VectorXd source = Eigen::VectorXd::Zero(10), target = Eigen::VectorXd::Zero(10);
        const Eigen::VectorXd image_areas = signed_areas(r.images, m.faces);
        for (int f = 0; f < m.face_count(); ++f) {
            const int k = cell(m.centroid(f));
            source[k] += mu.values[f] * m.areas[f];
            const Eigen::RowVector2d c =
                (r.images.row(m.faces(f, 0)) + r.images.row(m.faces(f, 1)) + r.images.row(m.faces(f, 2))) / 3.0;
            target[k] += nu.values[m.locator.locate({c[0], c[1]}).face] * image_areas[f];
        }
        for (int k = 0; k < 10; ++k) CHECK(target[k] == doctest::Approx(source[k]).epsilon(0.02));
    }

    SUBCASE("refinement reduces the residuals") {
        double previous = std::numeric_limits<double>::infinity();
        for (auto [h, steps] : {std::pair{0.08, 8}, std::pair{0.04, 16}}) {
            const DiskFEMesh g = build_disk_mesh(h);
            const auto a = resample_density([](Complex z) { return 1.0 + 0.5 * z.real() + 0.3 * std::norm(z); }, g, floor);
            const auto b = resample_density(
                [](Complex z) { return 1.0 + 0.4 * std::exp(-std::norm(z - Complex(0.2, 0.3)) / 0.1); }, g, floor);
            const MoserResult r = moser_map(a, b, g, steps);
            CHECK(r.area_residual_mean < previous);
            previous = r.area_residual_mean;
        }
    }
}

TEST_CASE("lambda is conserved along the flow at the default resolution") {
    const RunConfig cfg;
    const DiskFEMesh m = build_disk_mesh(cfg.h);
    const double floor = 1e-3 / kPi;
    const auto mu = resample_density([](Complex z) { return 1.0 + 0.5 * z.real(); }, m, floor);
    const auto nu = resample_density([](Complex z) { return 1.0 - 0.4 * z.imag(); }, m, floor);
    const MoserFlow flow(m, solve_neumann_poisson(m, mu.values - nu.values), mu, nu);
    const Eigen::MatrixXd lambda = lambda_history(flow, cfg.n_steps, {0.0, 0.5, 1.0});
    for (int k = 1; k < 3; ++k) {
        const Eigen::ArrayXd drift = ((lambda.row(k) - lambda.row(0)).array().abs() / lambda.row(0).array()).transpose();
        CHECK(drift.maxCoeff() < 0.05);
    }
}

TEST_CASE("coarse steps are retried") {
    const DiskFEMesh m = build_disk_mesh(0.05);
    const double floor = 1e-3 / kPi;
    const auto mu = resample_density([](Complex z) { return 0.05 + std::exp(-std::norm(z - 0.4) / 0.02); }, m, floor);
    const auto nu = resample_density([](Complex z) { return 0.05 + std::exp(-std::norm(z + 0.4) / 0.02); }, m, floor);
    const MoserResult r = moser_map(mu, nu, m, 1, 512);
    CHECK(r.flipped == 0);
    CHECK(r.n_steps > 1);
    CHECK(error_code([&] { moser_map(mu, nu, m, 1, 1); }) == "flipped_elements");
}
