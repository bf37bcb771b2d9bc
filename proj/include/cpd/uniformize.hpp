#pragma once

#include <Eigen/Core>

#include <complex>
#include <vector>

#include "cpd/mesh.hpp"

namespace cpd {

using Complex = std::complex<double>;

/// Point location in a planar triangulation via a uniform bucket grid.
/// Points outside every triangle are clamped to the nearest one.
class PlanarLocator {
public:
    struct Location {
        int face = -1;
        Eigen::Vector3d bary = Eigen::Vector3d::Zero();
        /// False when the point was clamped onto the nearest face.
        bool inside = false;
        /// Distance from the query to the located face (0 when inside).
        double distance = 0.0;
    };

    PlanarLocator() = default;
    PlanarLocator(Points2 coords, Faces faces);

    Location locate(Complex z) const;

    const Points2& coords() const { return coords_; }
    const Faces& faces() const { return faces_; }

    /// Barycentric interpolation of per-vertex rows.
    template <typename Derived>
    Eigen::Matrix<typename Derived::Scalar, 1, Derived::ColsAtCompileTime> interpolate(
        const Location& loc, const Eigen::MatrixBase<Derived>& values) const {
        return loc.bary[0] * values.row(faces_(loc.face, 0)) + loc.bary[1] * values.row(faces_(loc.face, 1)) +
               loc.bary[2] * values.row(faces_(loc.face, 2));
    }

private:
    Eigen::Vector3d barycentric(int f, Complex z) const;
    double distance_to_face(int f, Complex z, Eigen::Vector3d& bary) const;
    int cell_index(int ix, int iy) const { return iy * nx_ + ix; }

    Points2 coords_;
    Faces faces_;
    double x0_ = 0, y0_ = 0, cell_ = 1;
    int nx_ = 0, ny_ = 0;
    std::vector<int> cell_offsets_, cell_faces_;
};

/// Flattening of a disk-type surface onto the unit disk.
struct DiskParam {
    TriangleMesh surface;
    /// Per-vertex planar positions; boundary vertices lie on |z| = 1.
    Points2 planar_coords;
    /// Per-face area3D / area2D.
    Eigen::VectorXd face_density;
    Eigen::VectorXd planar_areas;
    PlanarLocator locator;

    Complex position(int v) const { return {planar_coords(v, 0), planar_coords(v, 1)}; }
};

/// Harmonic map to the disk: boundary on the unit circle by arclength,
/// interior by the cotangent Laplacian. Throws NumericalError
/// "non_bijective_flattening" when a planar face comes out flipped.
DiskParam flatten_to_disk(const TriangleMesh& mesh);

/// Piecewise-constant density at a point of the closed disk.
double conformal_density_at(const DiskParam& param, Complex z);

/// Area-weighted average of incident face densities (weights: planar area).
Eigen::VectorXd vertex_density(const DiskParam& param);

/// (1 - |z_v|^2)^2 * vertex_density(v); exactly 0 on the boundary.
Eigen::VectorXd hyperbolic_density(const DiskParam& param);

enum class ExtremumKind { max, min };

struct Extremum {
    int vertex = -1;
    Complex position;
    ExtremumKind kind = ExtremumKind::max;
    double value = 0.0;
};

struct ExtremaSet {
    /// Sorted by |value - median| descending.
    std::vector<Extremum> extrema;

    bool empty() const { return extrema.empty(); }
    std::size_t size() const { return extrema.size(); }
};

/// Strict 1-ring extrema of the hyperbolic density after one pass of
/// area-weighted smoothing, interior vertices only, at most `max_extrema`.
ExtremaSet find_extrema(const DiskParam& param, int max_extrema = 8);

/// Planar triangle areas (signed, counterclockwise positive).
Eigen::VectorXd signed_areas(const Points2& coords, const Faces& faces);

}  // namespace cpd
