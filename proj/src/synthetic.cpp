#include "cpd/synthetic.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

#include "cpd/moser.hpp"

namespace cpd::synthetic {

TriangleMesh height_field(int rings, const std::function<double(double, double)>& f) {
    const DiskFEMesh disk = build_disk_mesh(1.0 / rings);
    Vertices v(disk.vertex_count(), 3);
    for (int i = 0; i < disk.vertex_count(); ++i) {
        const double x = disk.vertices(i, 0), y = disk.vertices(i, 1);
        v.row(i) << x, y, f(x, y);
    }
    return TriangleMesh::from_arrays(std::move(v), disk.faces);
}

TriangleMesh flat_disk(int rings) {
    return height_field(rings, [](double, double) { return 0.0; });
}

TriangleMesh bumpy_disk(int rings, const std::vector<Bump>& bumps) {
    return height_field(rings, [&](double x, double y) {
        double z = 0.0;
        for (const auto& b : bumps) {
            const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
            z += b.height * std::exp(-d2 / (2.0 * b.width * b.width));
        }
        return z;
    });
}

TriangleMesh spherical_cap(int rings, double cap_angle) {
    const DiskFEMesh disk = build_disk_mesh(1.0 / rings);
    Vertices v(disk.vertex_count(), 3);
    for (int i = 0; i < disk.vertex_count(); ++i) {
        const double x = disk.vertices(i, 0), y = disk.vertices(i, 1);
        const double r = std::hypot(x, y);
        const double polar = r * cap_angle;
        const double azimuth = std::atan2(y, x);
        v.row(i) << std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), std::cos(polar);
    }
    return TriangleMesh::from_arrays(std::move(v), disk.faces);
}

RigidMotiond random_motion(std::mt19937_64& rng, bool reflect, double translation_scale) {
    std::normal_distribution<double> gauss;
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    RigidMotiond m;
    m.U = q.toRotationMatrix();
    if (reflect) m.U.col(0) *= -1.0;
    m.t = translation_scale * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    return m;
}

TriangleMesh transformed(const TriangleMesh& mesh, const RigidMotiond& motion) {
    return mesh.with_vertices(motion.apply_rows(mesh.vertices()));
}

TriangleMesh mirrored(const TriangleMesh& mesh) {
    Vertices v = mesh.vertices();
    v.col(0) *= -1.0;
    Faces f = mesh.faces();
    f.col(1).swap(f.col(2));
    return TriangleMesh::from_arrays(std::move(v), std::move(f));
}

std::vector<TriangleMesh> suite(int count, int rings, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<TriangleMesh> out;
    for (int i = 0; i < count; ++i) {
        std::vector<Bump> bumps;
        const int n = 1 + i % 3;
        for (int b = 0; b < n; ++b) {
            const double radius = 0.55 * std::sqrt(unit(rng));
            const double angle = 2.0 * std::numbers::pi * unit(rng);
            bumps.push_back({radius * std::cos(angle), radius * std::sin(angle), 0.15 + 0.25 * unit(rng),
                             0.18 + 0.12 * unit(rng)});
        }
        out.push_back(bumpy_disk(rings, bumps));
    }
    return out;
}

}  // namespace cpd::synthetic
