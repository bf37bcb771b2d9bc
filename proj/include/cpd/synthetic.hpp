#pragma once

#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "cpd/mesh.hpp"
#include "cpd/rigid.hpp"

namespace cpd::synthetic {

/// Gaussian bump of the given height and width centered at (x, y).
struct Bump {
    double x = 0.0, y = 0.0;
    double height = 0.0;
    double width = 0.3;
};

/// Flat unit disk triangulated in concentric rings; `rings` rings give
/// 1 + 3 rings (rings + 1) vertices.
TriangleMesh flat_disk(int rings);

/// Graph of f over the ring-triangulated unit disk.
TriangleMesh height_field(int rings, const std::function<double(double, double)>& f);

TriangleMesh bumpy_disk(int rings, const std::vector<Bump>& bumps);

/// Spherical cap with polar angle up to `cap_angle` (pi/2 = hemisphere).
TriangleMesh spherical_cap(int rings, double cap_angle);

/// Uniformly random rotation, optionally composed with a reflection.
RigidMotiond random_motion(std::mt19937_64& rng, bool reflect, double translation_scale = 1.0);

TriangleMesh transformed(const TriangleMesh& mesh, const RigidMotiond& motion);

/// Reflection through the plane x = 0 with face winding reversed, so the
/// mirror keeps a consistent outward orientation.
TriangleMesh mirrored(const TriangleMesh& mesh);

/// A family of `count` distinct bumpy disks with ~2000 vertices at the
/// default ring count.
std::vector<TriangleMesh> suite(int count, int rings = 25, unsigned seed = 7);

}  // namespace cpd::synthetic
