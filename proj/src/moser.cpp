#include "cpd/moser.hpp"
#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>

namespace cpd {

namespace {

// Radial projection onto the circle that never rounds to |w| > 1.
Complex onto_circle(Complex w) {
    w /= std::abs(w);
    while (std::abs(w) > 1.0) w *= 1.0 - std::numeric_limits<double>::epsilon();
    return w;
}

double edge_extreme(const DiskFEMesh& mesh, bool longest) {
    double out = longest ? 0.0 : std::numeric_limits<double>::infinity();
    for (int f = 0; f < mesh.face_count(); ++f)
        for (int k = 0; k < 3; ++k) {
            const double l = (mesh.vertices.row(mesh.faces(f, k)) - mesh.vertices.row(mesh.faces(f, (k + 1) % 3))).norm();
            out = longest ? std::max(out, l) : std::min(out, l);
        }
    return out;
}

}  // namespace

double DiskFEMesh::max_edge_length() const { return edge_extreme(*this, true); }
double DiskFEMesh::min_edge_length() const { return edge_extreme(*this, false); }

DiskFEMesh build_disk_mesh(double h) {
    if (!(h > 0.0 && h < 1.0)) throw InputError("bad_mesh_size", "disk mesh size must satisfy 0 < h < 1");
    const int rings = static_cast<int>(std::ceil(1.0 / h - 1e-9));
    const double vertex_estimate = 1.0 + 3.0 * rings * (rings + 1.0);
    if (vertex_estimate > 1e6) throw InputError("mesh_too_fine", "disk mesh would exceed 10^6 vertices");

    const int nv = 1 + 3 * rings * (rings + 1);
    DiskFEMesh mesh;
    mesh.h = h;
    mesh.vertices.resize(nv, 2);
    mesh.boundary.assign(nv, 0);
    mesh.vertices.row(0) << 0.0, 0.0;
    // ring k occupies [ring_start(k), ring_start(k) + 6k)
    const auto ring_start = [](int k) { return k == 0 ? 0 : 1 + 3 * (k - 1) * k; };
    for (int k = 1; k <= rings; ++k) {
        const double r = static_cast<double>(k) / rings;
        for (int j = 0; j < 6 * k; ++j) {
            const double angle = 2.0 * std::numbers::pi * j / (6 * k);
            const int v = ring_start(k) + j;
            if (k == rings) {
                mesh.vertices.row(v) << std::cos(angle), std::sin(angle);
                mesh.boundary[v] = 1;
            } else {
                mesh.vertices.row(v) << r * std::cos(angle), r * std::sin(angle);
            }
        }
    }

    std::vector<std::array<int, 3>> tris;
    for (int j = 0; j < 6; ++j) tris.push_back({0, ring_start(1) + j, ring_start(1) + (j + 1) % 6});
    for (int k = 2; k <= rings; ++k) {
        const int n_in = 6 * (k - 1), n_out = 6 * k;
        const int s_in = ring_start(k - 1), s_out = ring_start(k);
        int i = 0, j = 0;
        while (i < n_in || j < n_out) {
            const double next_in = static_cast<double>(i + 1) / n_in;
            const double next_out = static_cast<double>(j + 1) / n_out;
            const int a = s_in + i % n_in, b = s_out + j % n_out;
            if (j >= n_out || (i < n_in && next_in < next_out)) {
                tris.push_back({a, b, s_in + (i + 1) % n_in});
                ++i;
            } else {
                tris.push_back({a, b, s_out + (j + 1) % n_out});
                ++j;
            }
        }
    }
    mesh.faces.resize(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t f = 0; f < tris.size(); ++f) mesh.faces.row(f) << tris[f][0], tris[f][1], tris[f][2];

    mesh.areas = signed_areas(mesh.vertices, mesh.faces);
    mesh.basis_gradients.resize(tris.size());
    std::vector<std::vector<int>> vf(nv);
    for (int f = 0; f < mesh.face_count(); ++f) {
        auto& G = mesh.basis_gradients[f];
        for (int k = 0; k < 3; ++k) {
            const Eigen::Vector2d d = mesh.vertices.row(mesh.faces(f, (k + 2) % 3)) - mesh.vertices.row(mesh.faces(f, (k + 1) % 3));
            G.row(k) << -d.y() / (2.0 * mesh.areas[f]), d.x() / (2.0 * mesh.areas[f]);
            vf[mesh.faces(f, k)].push_back(f);
        }
    }
    mesh.vertex_face_offsets.assign(nv + 1, 0);
    for (int v = 0; v < nv; ++v) mesh.vertex_face_offsets[v + 1] = mesh.vertex_face_offsets[v] + static_cast<int>(vf[v].size());
    for (const auto& list : vf) mesh.vertex_faces.insert(mesh.vertex_faces.end(), list.begin(), list.end());
    mesh.locator = PlanarLocator(mesh.vertices, mesh.faces);
    return mesh;
}

ElementDensity resample_density(const std::function<double(Complex)>& source, const DiskFEMesh& mesh,
                                double eps_floor) {
    ElementDensity out;
    out.floor = eps_floor;
    out.values.resize(mesh.face_count());
    for (int f = 0; f < mesh.face_count(); ++f) out.values[f] = std::max(source(mesh.centroid(f)), eps_floor);
    out.values /= out.mass(mesh);
    return out;
}

ElementDensity resample_density(const PlanarLocator& triangulation, const Eigen::VectorXd& face_density,
                                const DiskFEMesh& mesh, double eps_floor) {
    return resample_density([&](Complex z) { return face_density[triangulation.locate(z).face]; }, mesh,
                            eps_floor);
}

// ---------------------------------------------------------------------------
// Poisson

NeumannPoisson::NeumannPoisson(const DiskFEMesh& mesh) : mesh_(&mesh) {
    const int nv = mesh.vertex_count();
    lumped_mass_ = Eigen::VectorXd::Zero(nv);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(9 * mesh.face_count());
    // Vertex 0 is pinned; unknown index = vertex - 1.
    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& G = mesh.basis_gradients[f];
        const Eigen::Matrix3d Ke = mesh.areas[f] * G * G.transpose();
        for (int i = 0; i < 3; ++i) {
            lumped_mass_[mesh.faces(f, i)] += mesh.areas[f] / 3.0;
            for (int j = 0; j < 3; ++j) {
                const int r = mesh.faces(f, i) - 1, c = mesh.faces(f, j) - 1;
                if (r >= 0 && c >= 0) triplets.emplace_back(r, c, Ke(i, j));
            }
        }
    }
    Eigen::SparseMatrix<double> K(nv - 1, nv - 1);
    K.setFromTriplets(triplets.begin(), triplets.end());
    solver_.compute(K);
    if (solver_.info() != Eigen::Success) throw NumericalError("singular_stiffness", "stiffness factorization failed");

    // Gradient recovery: least-squares quadratic through the 2-ring of each
    // vertex, differentiated at the vertex.
    std::vector<Eigen::Triplet<double>> rx, ry;
    std::vector<int> patch, mark(nv, -1);
    for (int v = 0; v < nv; ++v) {
        patch.assign(1, v);
        mark[v] = v;
        for (int pass = 0, begin = 0; pass < 2; ++pass) {
            const int end = static_cast<int>(patch.size());
            for (int i = begin; i < end; ++i)
                for (int o = mesh.vertex_face_offsets[patch[i]]; o < mesh.vertex_face_offsets[patch[i] + 1]; ++o)
                    for (int k = 0; k < 3; ++k) {
                        const int u = mesh.faces(mesh.vertex_faces[o], k);
                        if (mark[u] != v) {
                            mark[u] = v;
                            patch.push_back(u);
                        }
                    }
            begin = end;
        }
        Eigen::MatrixXd A(patch.size(), 6);
        for (std::size_t i = 0; i < patch.size(); ++i) {
            const double dx = (mesh.vertices(patch[i], 0) - mesh.vertices(v, 0)) / mesh.h;
            const double dy = (mesh.vertices(patch[i], 1) - mesh.vertices(v, 1)) / mesh.h;
            A.row(i) << 1.0, dx, dy, dx * dx, dx * dy, dy * dy;
        }
        const Eigen::MatrixXd pinv = A.completeOrthogonalDecomposition().pseudoInverse();
        Eigen::Vector2d normal = Eigen::Vector2d::Zero();
        if (mesh.boundary[v]) normal = mesh.vertices.row(v).transpose().normalized();
        for (std::size_t i = 0; i < patch.size(); ++i) {
            Eigen::Vector2d g(pinv(1, i) / mesh.h, pinv(2, i) / mesh.h);
            g -= g.dot(normal) * normal;
            rx.emplace_back(v, patch[i], g.x());
            ry.emplace_back(v, patch[i], g.y());
        }
    }
    recover_x_.resize(nv, nv);
    recover_y_.resize(nv, nv);
    recover_x_.setFromTriplets(rx.begin(), rx.end());
    recover_y_.setFromTriplets(ry.begin(), ry.end());
}

FlowField NeumannPoisson::solve(const Eigen::VectorXd& element_rhs) const {
    const DiskFEMesh& mesh = *mesh_;
    if (element_rhs.size() != mesh.face_count()) throw InputError("rhs_mismatch", "rhs size differs from element count");
    const double mean = element_rhs.dot(mesh.areas) / mesh.areas.sum();

    // Weak form: -int grad a . grad w = int f w, so K a = -b.
    Eigen::VectorXd load = Eigen::VectorXd::Zero(mesh.vertex_count());
    for (int f = 0; f < mesh.face_count(); ++f)
        for (int k = 0; k < 3; ++k) load[mesh.faces(f, k)] -= (element_rhs[f] - mean) * mesh.areas[f] / 3.0;

    FlowField out;
    out.potential = Eigen::VectorXd::Zero(mesh.vertex_count());
    out.potential.tail(mesh.vertex_count() - 1) = solver_.solve(load.tail(mesh.vertex_count() - 1));
    if (solver_.info() != Eigen::Success || !out.potential.allFinite())
        throw NumericalError("singular_stiffness", "Poisson solve failed");
    out.potential.array() -= out.potential.dot(lumped_mass_) / lumped_mass_.sum();

    out.velocity.resize(mesh.face_count(), 2);
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Eigen::Vector3d a(out.potential[mesh.faces(f, 0)], out.potential[mesh.faces(f, 1)],
                                out.potential[mesh.faces(f, 2)]);
        out.velocity.row(f) = a.transpose() * mesh.basis_gradients[f];
    }
    out.nodal_velocity.resize(mesh.vertex_count(), 2);
    out.nodal_velocity.col(0) = recover_x_ * out.potential;
    out.nodal_velocity.col(1) = recover_y_ * out.potential;
    return out;
}

FlowField solve_neumann_poisson(const DiskFEMesh& mesh, const Eigen::VectorXd& element_rhs) {
    return NeumannPoisson(mesh).solve(element_rhs);
}

// ---------------------------------------------------------------------------
// Flow

MoserFlow::MoserFlow(const DiskFEMesh& mesh, FlowField field, ElementDensity mu, ElementDensity nu)
    : mesh_(&mesh), field_(std::move(field)), mu_(std::move(mu)), nu_(std::move(nu)) {
    if (mu_.values.size() != mesh.face_count() || nu_.values.size() != mesh.face_count())
        throw InputError("density_mismatch", "densities do not match the mesh");
    if (field_.nodal_velocity.rows() != mesh.vertex_count())
        throw InputError("field_mismatch", "flow field does not match the mesh");
    trivial_ = field_.nodal_velocity.isZero(0.0);
}

Complex MoserFlow::velocity(Complex z, double t, bool on_circle) const {
    const auto loc = mesh_->locator.locate(z);
    if (loc.face < 0) throw NumericalError("point_location", "point location failed");
    const int f = loc.face;
    const Eigen::RowVector2d g = loc.bary[0] * field_.nodal_velocity.row(mesh_->faces(f, 0)) +
                                 loc.bary[1] * field_.nodal_velocity.row(mesh_->faces(f, 1)) +
                                 loc.bary[2] * field_.nodal_velocity.row(mesh_->faces(f, 2));
    Complex v = Complex(g[0], g[1]) / (t * nu_.values[f] + (1.0 - t) * mu_.values[f]);
    if (on_circle) {
        const Complex tangent = Complex(0, 1) * z / std::abs(z);
        v = tangent * (v.real() * tangent.real() + v.imag() * tangent.imag());
    }
    return v;
}

Complex MoserFlow::step(Complex z, double t, double dt, bool on_circle) const {
    const auto settle = [&](Complex w) {
        const double r = std::abs(w);
        return (on_circle || r > 1.0) ? onto_circle(w) : w;
    };
    const Complex k1 = velocity(z, t, on_circle);
    const Complex k2 = velocity(settle(z + 0.5 * dt * k1), t + 0.5 * dt, on_circle);
    const Complex k3 = velocity(settle(z + 0.5 * dt * k2), t + 0.5 * dt, on_circle);
    const Complex k4 = velocity(settle(z + dt * k3), t + dt, on_circle);
    return settle(z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Complex MoserFlow::flow(Complex z0, int n_steps) const {
    if (trivial_) return z0;
    if (n_steps < 1) throw InputError("bad_step_count", "n_steps must be positive");
    constexpr double kOnCircle = 1e-12;
    Complex z = z0;
    if (std::abs(z) > 1.0) z = onto_circle(z);
    const double dt = 1.0 / n_steps;
    for (int s = 0; s < n_steps; ++s) {
        const bool on_circle = std::abs(z) >= 1.0 - kOnCircle;
        z = step(z, s * dt, dt, on_circle);
    }
    return z;
}

std::vector<Complex> MoserFlow::trajectory(Complex z0, int n_steps, const std::vector<double>& times) const {
    if (n_steps < 1) throw InputError("bad_step_count", "n_steps must be positive");
    constexpr double kOnCircle = 1e-12;
    std::vector<Complex> out;
    out.reserve(times.size());
    Complex z = z0;
    if (std::abs(z) > 1.0) z = onto_circle(z);
    const double dt = 1.0 / n_steps;
    int s = 0;
    for (double t : times) {
        const int target = static_cast<int>(std::lround(t * n_steps));
        for (; s < target; ++s) {
            if (trivial_) continue;
            const bool on_circle = std::abs(z) >= 1.0 - kOnCircle;
            z = step(z, s * dt, dt, on_circle);
        }
        out.push_back(z);
    }
    return out;
}

Complex flow_point(const MoserFlow& flow, Complex z0, int n_steps) { return flow.flow(z0, n_steps); }

Eigen::VectorXd area_residuals(const DiskFEMesh& mesh, const Points2& images, const ElementDensity& mu,
                               const ElementDensity& nu) {
    const Eigen::VectorXd image_areas = signed_areas(images, mesh.faces);
    Eigen::VectorXd out(mesh.face_count());
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Eigen::RowVector2d c =
            (images.row(mesh.faces(f, 0)) + images.row(mesh.faces(f, 1)) + images.row(mesh.faces(f, 2))) / 3.0;
        const int g = mesh.locator.locate({c[0], c[1]}).face;
        const double det = image_areas[f] / mesh.areas[f];
        out[f] = std::abs(nu.values[g] * det - mu.values[f]) / mu.values[f];
    }
    return out;
}

MoserResult moser_map(const ElementDensity& mu, const ElementDensity& nu, const DiskFEMesh& mesh, int n_steps,
                      int max_steps) {
    const FlowField field = solve_neumann_poisson(mesh, mu.values - nu.values);
    const MoserFlow flow(mesh, field, mu, nu);

    MoserResult out;
    for (int steps = n_steps;; steps *= 2) {
        out.images.resize(mesh.vertex_count(), 2);
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            const Complex w = flow.flow({mesh.vertices(v, 0), mesh.vertices(v, 1)}, steps);
            out.images.row(v) << w.real(), w.imag();
        }
        out.n_steps = steps;
        out.flipped = static_cast<int>((signed_areas(out.images, mesh.faces).array() <= 0.0).count());
        if (out.flipped == 0) break;
        if (steps * 2 > max_steps)
            throw NumericalError("flipped_elements",
                                 std::to_string(out.flipped) + " elements flipped by the Moser flow");
    }
    const Eigen::VectorXd residual = area_residuals(mesh, out.images, mu, nu);
    out.area_residual = residual.maxCoeff();
    out.area_residual_mean = residual.dot(mesh.areas) / mesh.areas.sum();
    return out;
}

Eigen::MatrixXd lambda_history(const MoserFlow& flow, int n_steps, const std::vector<double>& times) {
    const DiskFEMesh& mesh = flow.mesh();
    std::vector<Points2> snapshots(times.size(), Points2(mesh.vertex_count(), 2));
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        const auto path = flow.trajectory({mesh.vertices(v, 0), mesh.vertices(v, 1)}, n_steps, times);
        for (std::size_t k = 0; k < times.size(); ++k) snapshots[k].row(v) << path[k].real(), path[k].imag();
    }
    Eigen::MatrixXd out(times.size(), mesh.face_count());
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        const Eigen::VectorXd image_areas = signed_areas(snapshots[k], mesh.faces);
        for (int f = 0; f < mesh.face_count(); ++f) {
            const Eigen::RowVector2d c = (snapshots[k].row(mesh.faces(f, 0)) + snapshots[k].row(mesh.faces(f, 1)) +
                                          snapshots[k].row(mesh.faces(f, 2))) / 3.0;
            const int g = mesh.locator.locate({c[0], c[1]}).face;
            const double interp = t * flow.nu().values[g] + (1.0 - t) * flow.mu().values[g];
            out(k, f) = image_areas[f] / mesh.areas[f] * interp;
        }
    }
    return out;
}

}  // namespace cpd
