#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "cpd/uniformize.hpp"

namespace cpd {

/// Quasi-uniform triangulation of the closed unit disk built from
/// concentric rings (ring k carries 6k vertices).
struct DiskFEMesh {
    Points2 vertices;
    Faces faces;
    std::vector<std::uint8_t> boundary;
    double h = 0.0;
    Eigen::VectorXd areas;
    /// Per-element gradients of the three barycentric basis functions (rows).
    std::vector<Eigen::Matrix<double, 3, 2>> basis_gradients;
    /// Incident elements per vertex (CSR).
    std::vector<int> vertex_face_offsets, vertex_faces;
    PlanarLocator locator;

    int vertex_count() const { return static_cast<int>(vertices.rows()); }
    int face_count() const { return static_cast<int>(faces.rows()); }
    Complex centroid(int f) const {
        const Eigen::RowVector2d c = (vertices.row(faces(f, 0)) + vertices.row(faces(f, 1)) + vertices.row(faces(f, 2))) / 3.0;
        return {c[0], c[1]};
    }
    double max_edge_length() const;
    double min_edge_length() const;
};

/// Throws InputError "mesh_too_fine" beyond 10^6 vertices, "bad_mesh_size"
/// unless 0 < h < 1.
DiskFEMesh build_disk_mesh(double h);

/// Piecewise-constant density on the elements of a DiskFEMesh.
struct ElementDensity {
    Eigen::VectorXd values;
    double floor = 0.0;

    /// sum_e values_e * area_e.
    double mass(const DiskFEMesh& mesh) const { return values.dot(mesh.areas); }
};

/// Midpoint sampling, floored at `eps_floor`, renormalized to unit mass.
ElementDensity resample_density(const std::function<double(Complex)>& source, const DiskFEMesh& mesh,
                                double eps_floor);

/// Same, sampling a piecewise-constant density given on a planar triangulation.
ElementDensity resample_density(const PlanarLocator& triangulation, const Eigen::VectorXd& face_density,
                                const DiskFEMesh& mesh, double eps_floor);

/// Potential a and its gradient v = grad a.
struct FlowField {
    Eigen::VectorXd potential;
    /// Per-element constant gradient.
    Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> velocity;
    /// Gradient recovered at the vertices from a local quadratic fit of the
    /// potential; normal component removed on the boundary.
    Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> nodal_velocity;
};

/// Factorized P1 Neumann Laplacian, reusable across right-hand sides.
class NeumannPoisson {
public:
    explicit NeumannPoisson(const DiskFEMesh& mesh);

    /// Solves lap(a) = rhs, da/dn = 0. The rhs is projected to zero mean
    /// first; the solution has zero (lumped-mass) mean.
    FlowField solve(const Eigen::VectorXd& element_rhs) const;

    const DiskFEMesh& mesh() const { return *mesh_; }

private:
    const DiskFEMesh* mesh_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
    Eigen::VectorXd lumped_mass_;
    Eigen::SparseMatrix<double, Eigen::RowMajor> recover_x_, recover_y_;
};

FlowField solve_neumann_poisson(const DiskFEMesh& mesh, const Eigen::VectorXd& element_rhs);

/// Integrates dz/dt = v(z) / (t nu(z) + (1 - t) mu(z)) over t in [0, 1]
/// with classical RK4. v is the linear interpolant of the recovered nodal
/// gradient; the densities are piecewise constant.
///
/// Points on the unit circle move along its tangent and are kept on it;
/// interior points that drift outside are projected radially back.
class MoserFlow {
public:
    MoserFlow(const DiskFEMesh& mesh, FlowField field, ElementDensity mu, ElementDensity nu);

    Complex flow(Complex z0, int n_steps) const;

    /// Flows to each time in `times` (ascending, in [0, 1]); returns one
    /// position per time.
    std::vector<Complex> trajectory(Complex z0, int n_steps, const std::vector<double>& times) const;

    const DiskFEMesh& mesh() const { return *mesh_; }
    const FlowField& field() const { return field_; }
    const ElementDensity& mu() const { return mu_; }
    const ElementDensity& nu() const { return nu_; }
    bool trivial() const { return trivial_; }

private:
    Complex velocity(Complex z, double t, bool on_circle) const;
    Complex step(Complex z, double t, double dt, bool on_circle) const;

    const DiskFEMesh* mesh_;
    FlowField field_;
    ElementDensity mu_, nu_;
    bool trivial_ = false;
};

Complex flow_point(const MoserFlow& flow, Complex z0, int n_steps);

struct MoserResult {
    /// Image of every DiskFEMesh vertex.
    Points2 images;
    int n_steps = 0;
    /// max_e |nu(phi) det(grad phi) - mu| / mu.
    double area_residual = 0.0;
    /// Area-weighted mean of the same quantity.
    double area_residual_mean = 0.0;
    int flipped = 0;
};

/// Flows every vertex of the mesh. Doubles n_steps on flipped elements up
/// to `max_steps`, then throws NumericalError "flipped_elements".
MoserResult moser_map(const ElementDensity& mu, const ElementDensity& nu, const DiskFEMesh& mesh, int n_steps,
                      int max_steps = 512);

/// Per-element lambda(t) = det(grad Phi_t) (t nu + (1 - t) mu)(Phi_t) at the
/// given times, from the flowed vertex positions. Row k holds time k.
Eigen::MatrixXd lambda_history(const MoserFlow& flow, int n_steps, const std::vector<double>& times);

/// Per-element area-preservation residual of a vertex image map.
Eigen::VectorXd area_residuals(const DiskFEMesh& mesh, const Points2& images, const ElementDensity& mu,
                               const ElementDensity& nu);

}  // namespace cpd
