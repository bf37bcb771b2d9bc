#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cpd/errors.hpp"

namespace cpd {

using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

enum class MeshFormat { OFF, OBJ, PLY };

/// Embedded triangle mesh of disk topology.
///
/// Construction validates the mesh: single connected component, manifold,
/// consistently oriented, exactly one boundary loop, Euler characteristic 1,
/// and no degenerate faces. Instances are immutable afterwards.
class TriangleMesh {
public:
    /// Throws InputError with one of the codes "non_manifold",
    /// "topology_not_disk", "degenerate_face", "bad_index".
    static TriangleMesh from_arrays(Vertices vertices, Faces faces);

    const Vertices& vertices() const { return vertices_; }
    const Faces& faces() const { return faces_; }
    const std::vector<int>& boundary_loop() const { return boundary_; }

    int vertex_count() const { return static_cast<int>(vertices_.rows()); }
    int face_count() const { return static_cast<int>(faces_.rows()); }
    int edge_count() const { return edge_count_; }
    int euler_characteristic() const { return vertex_count() - edge_count() + face_count(); }

    bool is_boundary(int v) const { return on_boundary_[v] != 0; }

    /// 1-ring neighbors of `v` (unordered).
    std::span<const int> neighbors(int v) const {
        return {adjacency_.data() + adjacency_offsets_[v],
                adjacency_.data() + adjacency_offsets_[v + 1]};
    }

    /// Faces incident to `v`.
    std::span<const int> incident_faces(int v) const {
        return {vertex_faces_.data() + vertex_face_offsets_[v],
                vertex_faces_.data() + vertex_face_offsets_[v + 1]};
    }

    double face_area(int f) const { return face_areas_[f]; }
    const Eigen::VectorXd& face_areas() const { return face_areas_; }
    double total_area() const { return total_area_; }
    double max_edge_length() const { return max_edge_length_; }

    /// Same connectivity, new positions. Re-runs validation.
    TriangleMesh with_vertices(Vertices vertices) const;

private:
    TriangleMesh() = default;

    Vertices vertices_;
    Faces faces_;
    std::vector<int> boundary_;
    std::vector<std::uint8_t> on_boundary_;
    std::vector<int> adjacency_offsets_, adjacency_;
    std::vector<int> vertex_face_offsets_, vertex_faces_;
    Eigen::VectorXd face_areas_;
    double total_area_ = 0.0;
    double max_edge_length_ = 0.0;
    int edge_count_ = 0;
};

TriangleMesh load_mesh(std::istream& in, MeshFormat format);

/// Format deduced from the extension (.off, .obj, .ply).
TriangleMesh load_mesh(const std::filesystem::path& path);

void write_off(std::ostream& out, const TriangleMesh& mesh);

/// Area-weighted centroid, exact for the piecewise-linear surface.
Eigen::Vector3d centroid(const TriangleMesh& mesh);

/// Uniformly rescales about the centroid to unit area and moves the centroid
/// to the origin.
TriangleMesh normalize_area(const TriangleMesh& mesh);

/// Farthest-point sample set with Voronoi cell areas.
struct SamplingSet {
    std::vector<int> sample_indices;
    Eigen::VectorXd voronoi_areas;
    double fill_distance = 0.0;
    int mesh_vertex_count = 0;

    int size() const { return static_cast<int>(sample_indices.size()); }
};

/// Edge-graph shortest-path distances from a set of sources. `nearest[v]` is
/// the position in `sources` of the closest source.
struct GraphDistances {
    std::vector<double> distance;
    std::vector<int> nearest;
};

GraphDistances dijkstra(const TriangleMesh& mesh, std::span<const int> sources);

/// Edge-graph (Dijkstra) distance between two vertices.
double geodesic_distance(const TriangleMesh& mesh, int a, int b);

/// Greedy farthest-point sampling on edge-graph distances, starting at
/// `seed_vertex`. Each vertex carries a third of the area of each incident
/// face; that area is credited to the vertex's nearest sample.
SamplingSet farthest_point_sample(const TriangleMesh& mesh, int count, int seed_vertex = 0);

/// Sample positions q_l as an L x 3 matrix.
Vertices sample_points(const TriangleMesh& mesh, const SamplingSet& samples);

/// Rectangle rule: sum_l values[l] * voronoi_areas[l].
template <class T>
T integrate(const SamplingSet& samples, std::span<const T> values) {
    if (static_cast<int>(values.size()) != samples.size() || values.empty())
        throw InputError("sample_mismatch", "integrate: value count does not match sample count");
    T acc = values[0] * samples.voronoi_areas[0];
    for (int l = 1; l < samples.size(); ++l) acc = acc + values[l] * samples.voronoi_areas[l];
    return acc;
}

/// Rectangle rule for a function of position.
template <class F>
auto integrate(const TriangleMesh& mesh, const SamplingSet& samples, F&& f) {
    if (samples.mesh_vertex_count != mesh.vertex_count())
        throw InputError("sample_mismatch", "integrate: sample set belongs to a different mesh");
    using T = std::decay_t<decltype(f(Eigen::Vector3d{}))>;
    std::vector<T> values;
    values.reserve(samples.sample_indices.size());
    for (int v : samples.sample_indices) values.push_back(f(Eigen::Vector3d(mesh.vertices().row(v))));
    return integrate<T>(samples, std::span<const T>(values));
}

}  // namespace cpd
