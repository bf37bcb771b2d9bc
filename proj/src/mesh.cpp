#include "cpd/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>

namespace cpd {

namespace {

std::uint64_t edge_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

double triangle_area(const Vertices& v, int a, int b, int c) {
    Eigen::Vector3d e1 = v.row(b) - v.row(a);
    Eigen::Vector3d e2 = v.row(c) - v.row(a);
    return 0.5 * e1.cross(e2).norm();
}

// Builds CSR offsets/values from a list of buckets.
void to_csr(const std::vector<std::vector<int>>& buckets, std::vector<int>& offsets,
            std::vector<int>& values) {
    offsets.assign(buckets.size() + 1, 0);
    for (std::size_t i = 0; i < buckets.size(); ++i)
        offsets[i + 1] = offsets[i] + static_cast<int>(buckets[i].size());
    values.clear();
    values.reserve(offsets.back());
    for (const auto& b : buckets) values.insert(values.end(), b.begin(), b.end());
}

}  // namespace

TriangleMesh TriangleMesh::from_arrays(Vertices vertices, Faces faces) {
    const int nv = static_cast<int>(vertices.rows());
    const int nf = static_cast<int>(faces.rows());
    if (nv < 3 || nf < 1) throw InputError("topology_not_disk", "mesh has no faces");
    if (!vertices.allFinite()) throw InputError("parse_error", "non-finite vertex coordinate");

    TriangleMesh m;
    m.face_areas_.resize(nf);
    for (int f = 0; f < nf; ++f) {
        const int a = faces(f, 0), b = faces(f, 1), c = faces(f, 2);
        if (std::min({a, b, c}) < 0 || std::max({a, b, c}) >= nv)
            throw InputError("bad_index", "face " + std::to_string(f) + " references a missing vertex");
        if (a == b || b == c || a == c)
            throw InputError("degenerate_face", "face " + std::to_string(f) + " repeats a vertex");
        const double area = triangle_area(vertices, a, b, c);
        double longest = 0.0;
        for (int k = 0; k < 3; ++k)
            longest = std::max(longest, (vertices.row(faces(f, k)) - vertices.row(faces(f, (k + 1) % 3))).norm());
        if (!(area > 1e-12 * longest * longest))
            throw InputError("degenerate_face", "face " + std::to_string(f) + " has zero area");
        m.face_areas_[f] = area;
        m.max_edge_length_ = std::max(m.max_edge_length_, longest);
    }

    // Directed half-edges: each may appear at most once, otherwise the mesh
    // is non-manifold or inconsistently oriented.
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(3 * nf);
    for (int f = 0; f < nf; ++f)
        for (int k = 0; k < 3; ++k) {
            const int a = faces(f, k), b = faces(f, (k + 1) % 3);
            if (!directed.emplace(edge_key(a, b), f).second)
                throw InputError("non_manifold", "edge (" + std::to_string(a) + "," + std::to_string(b) +
                                                     ") used twice in the same direction");
        }

    std::vector<std::vector<int>> nbrs(nv), vfaces(nv);
    std::vector<int> boundary_next(nv, -1);
    int edges = 0;
    for (const auto& [key, f] : directed) {
        const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
        const bool has_twin = directed.count(edge_key(b, a)) != 0;
        if (!has_twin || a < b) {
            ++edges;
            nbrs[a].push_back(b);
            nbrs[b].push_back(a);
        }
        if (!has_twin) {
            if (boundary_next[a] != -1)
                throw InputError("non_manifold", "boundary vertex " + std::to_string(a) + " is pinched");
            boundary_next[a] = b;
        }
    }
    for (int f = 0; f < nf; ++f)
        for (int k = 0; k < 3; ++k) vfaces[faces(f, k)].push_back(f);
    for (int v = 0; v < nv; ++v) {
        if (vfaces[v].empty()) throw InputError("non_manifold", "vertex " + std::to_string(v) + " is unreferenced");
        std::sort(nbrs[v].begin(), nbrs[v].end());
    }

    // Single connected component.
    {
        std::vector<char> seen(nv, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : nbrs[v])
                if (!seen[w]) {
                    seen[w] = 1;
                    ++count;
                    stack.push_back(w);
                }
        }
        if (count != nv) throw InputError("topology_not_disk", "mesh has more than one connected component");
    }

    // Boundary loops.
    m.on_boundary_.assign(nv, 0);
    int start = -1, boundary_vertices = 0;
    for (int v = 0; v < nv; ++v)
        if (boundary_next[v] != -1) {
            ++boundary_vertices;
            if (start == -1) start = v;
        }
    if (start == -1) throw InputError("topology_not_disk", "mesh has no boundary");
    for (int v = start;;) {
        m.boundary_.push_back(v);
        m.on_boundary_[v] = 1;
        v = boundary_next[v];
        if (v == start) break;
        if (v == -1 || m.on_boundary_[v]) throw InputError("non_manifold", "open boundary chain");
    }
    if (static_cast<int>(m.boundary_.size()) != boundary_vertices)
        throw InputError("topology_not_disk", "mesh has more than one boundary loop");

    m.edge_count_ = edges;
    if (nv - edges + nf != 1)
        throw InputError("topology_not_disk",
                         "Euler characteristic is " + std::to_string(nv - edges + nf) + ", expected 1");

    to_csr(nbrs, m.adjacency_offsets_, m.adjacency_);
    to_csr(vfaces, m.vertex_face_offsets_, m.vertex_faces_);
    m.total_area_ = m.face_areas_.sum();
    m.vertices_ = std::move(vertices);
    m.faces_ = std::move(faces);
    return m;
}

TriangleMesh TriangleMesh::with_vertices(Vertices vertices) const {
    if (vertices.rows() != vertices_.rows()) throw InputError("bad_index", "vertex count changed");
    return from_arrays(std::move(vertices), faces_);
}

// ---------------------------------------------------------------------------
// Readers

namespace {

// Strips comments and returns the next non-empty line.
bool next_data_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
}

[[noreturn]] void parse_fail(const std::string& what) { throw InputError("parse_error", what); }

void push_polygon(std::vector<std::array<int, 3>>& tris, const std::vector<int>& poly) {
    if (poly.size() < 3) parse_fail("polygon with fewer than 3 vertices");
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) tris.push_back({poly[0], poly[k], poly[k + 1]});
}

TriangleMesh assemble(const std::vector<Eigen::Vector3d>& pts, const std::vector<std::array<int, 3>>& tris) {
    Vertices v(pts.size(), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) v.row(i) = pts[i].transpose();
    Faces f(tris.size(), 3);
    for (std::size_t i = 0; i < tris.size(); ++i) f.row(i) << tris[i][0], tris[i][1], tris[i][2];
    return TriangleMesh::from_arrays(std::move(v), std::move(f));
}

TriangleMesh read_off(std::istream& in) {
    std::string line;
    if (!next_data_line(in, line)) parse_fail("empty OFF file");
    std::istringstream header(line);
    std::string magic;
    header >> magic;
    if (magic.rfind("OFF", 0) != 0) parse_fail("missing OFF magic");
    long nv = -1, nf = -1;
    if (!(header >> nv >> nf)) {
        if (!next_data_line(in, line)) parse_fail("missing OFF counts");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf)) parse_fail("bad OFF counts");
    }
    if (nv < 0 || nf < 0) parse_fail("negative OFF counts");
    std::vector<Eigen::Vector3d> pts(nv);
    for (long i = 0; i < nv; ++i) {
        if (!next_data_line(in, line)) parse_fail("truncated OFF vertex list");
        std::istringstream s(line);
        if (!(s >> pts[i].x() >> pts[i].y() >> pts[i].z())) parse_fail("bad OFF vertex line");
    }
    std::vector<std::array<int, 3>> tris;
    std::vector<int> poly;
    for (long i = 0; i < nf; ++i) {
        if (!next_data_line(in, line)) parse_fail("truncated OFF face list");
        std::istringstream s(line);
        int k = 0;
        if (!(s >> k) || k < 3) parse_fail("bad OFF face line");
        poly.resize(k);
        for (int j = 0; j < k; ++j)
            if (!(s >> poly[j])) parse_fail("bad OFF face line");
        push_polygon(tris, poly);
    }
    return assemble(pts, tris);
}

TriangleMesh read_obj(std::istream& in) {
    std::vector<Eigen::Vector3d> pts;
    std::vector<std::array<int, 3>> tris;
    std::vector<int> poly;
    std::string line;
    while (next_data_line(in, line)) {
        std::istringstream s(line);
        std::string tag;
        s >> tag;
        if (tag == "v") {
            Eigen::Vector3d p;
            if (!(s >> p.x() >> p.y() >> p.z())) parse_fail("bad OBJ vertex line");
            pts.push_back(p);
        } else if (tag == "f") {
            poly.clear();
            std::string tok;
            while (s >> tok) {
                // v, v/vt, v//vn, v/vt/vn
                const long idx = std::stol(tok.substr(0, tok.find('/')));
                const long resolved = idx > 0 ? idx - 1 : static_cast<long>(pts.size()) + idx;
                poly.push_back(static_cast<int>(resolved));
            }
            push_polygon(tris, poly);
        }
    }
    if (pts.empty()) parse_fail("OBJ file has no vertices");
    return assemble(pts, tris);
}

TriangleMesh read_ply(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0) parse_fail("missing PLY magic");
    long nv = -1, nf = -1;
    std::vector<std::string> vertex_props;
    std::string current;
    bool ascii = false;
    while (std::getline(in, line)) {
        std::istringstream s(line);
        std::string tag;
        s >> tag;
        if (tag == "format") {
            std::string kind;
            s >> kind;
            ascii = kind == "ascii";
        } else if (tag == "element") {
            long n = 0;
            s >> current >> n;
            if (current == "vertex") nv = n;
            if (current == "face") nf = n;
        } else if (tag == "property" && current == "vertex") {
            std::string type, name;
            s >> type >> name;
            vertex_props.push_back(name);
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!ascii) parse_fail("only ASCII PLY is supported");
    if (nv < 0 || nf < 0) parse_fail("PLY header lacks vertex/face elements");
    const auto find = [&](const char* name) {
        auto it = std::find(vertex_props.begin(), vertex_props.end(), name);
        if (it == vertex_props.end()) parse_fail(std::string("PLY vertex lacks property ") + name);
        return static_cast<std::size_t>(it - vertex_props.begin());
    };
    const std::size_t ix = find("x"), iy = find("y"), iz = find("z");
    std::vector<Eigen::Vector3d> pts(nv);
    std::vector<double> row(vertex_props.size());
    for (long i = 0; i < nv; ++i) {
        if (!next_data_line(in, line)) parse_fail("truncated PLY vertex list");
        std::istringstream s(line);
        for (double& x : row)
            if (!(s >> x)) parse_fail("bad PLY vertex line");
        pts[i] = {row[ix], row[iy], row[iz]};
    }
    std::vector<std::array<int, 3>> tris;
    std::vector<int> poly;
    for (long i = 0; i < nf; ++i) {
        if (!next_data_line(in, line)) parse_fail("truncated PLY face list");
        std::istringstream s(line);
        int k = 0;
        if (!(s >> k)) parse_fail("bad PLY face line");
        poly.resize(k);
        for (int j = 0; j < k; ++j)
            if (!(s >> poly[j])) parse_fail("bad PLY face line");
        push_polygon(tris, poly);
    }
    return assemble(pts, tris);
}

}  // namespace

TriangleMesh load_mesh(std::istream& in, MeshFormat format) {
    try {
        switch (format) {
            case MeshFormat::OFF: return read_off(in);
            case MeshFormat::OBJ: return read_obj(in);
            case MeshFormat::PLY: return read_ply(in);
        }
    } catch (const std::invalid_argument&) {
        parse_fail("malformed number");
    } catch (const std::out_of_range&) {
        parse_fail("number out of range");
    }
    parse_fail("unknown mesh format");
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    MeshFormat format;
    if (ext == ".off") format = MeshFormat::OFF;
    else if (ext == ".obj") format = MeshFormat::OBJ;
    else if (ext == ".ply") format = MeshFormat::PLY;
    else throw InputError("parse_error", "unrecognized mesh extension '" + ext + "'");
    std::ifstream in(path);
    if (!in) throw InputError("io_error", "cannot open " + path.string());
    return load_mesh(in, format);
}

void write_off(std::ostream& out, const TriangleMesh& mesh) {
    out.precision(17);
    out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
    for (int v = 0; v < mesh.vertex_count(); ++v)
        out << mesh.vertices()(v, 0) << ' ' << mesh.vertices()(v, 1) << ' ' << mesh.vertices()(v, 2) << '\n';
    for (int f = 0; f < mesh.face_count(); ++f)
        out << "3 " << mesh.faces()(f, 0) << ' ' << mesh.faces()(f, 1) << ' ' << mesh.faces()(f, 2) << '\n';
}

// ---------------------------------------------------------------------------
// Geometry

Eigen::Vector3d centroid(const TriangleMesh& mesh) {
    const auto& V = mesh.vertices();
    const auto& F = mesh.faces();
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (int f = 0; f < mesh.face_count(); ++f)
        acc += mesh.face_area(f) * (V.row(F(f, 0)) + V.row(F(f, 1)) + V.row(F(f, 2))).transpose() / 3.0;
    return acc / mesh.total_area();
}

TriangleMesh normalize_area(const TriangleMesh& mesh) {
    const double area = mesh.total_area();
    if (!(area > 0.0)) throw InputError("zero_area", "mesh has zero total area");
    const Eigen::RowVector3d c = centroid(mesh).transpose();
    Vertices v = (mesh.vertices().rowwise() - c) / std::sqrt(area);
    return mesh.with_vertices(std::move(v));
}

GraphDistances dijkstra(const TriangleMesh& mesh, std::span<const int> sources) {
    const int nv = mesh.vertex_count();
    const auto& V = mesh.vertices();
    GraphDistances out{std::vector<double>(nv, std::numeric_limits<double>::infinity()), std::vector<int>(nv, -1)};
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const int v = sources[s];
        if (v < 0 || v >= nv) throw InputError("bad_index", "source vertex out of range");
        if (out.distance[v] > 0.0) {
            out.distance[v] = 0.0;
            out.nearest[v] = static_cast<int>(s);
            queue.emplace(0.0, v);
        }
    }
    while (!queue.empty()) {
        const auto [d, v] = queue.top();
        queue.pop();
        if (d > out.distance[v]) continue;
        for (int w : mesh.neighbors(v)) {
            const double nd = d + (V.row(v) - V.row(w)).norm();
            if (nd < out.distance[w]) {
                out.distance[w] = nd;
                out.nearest[w] = out.nearest[v];
                queue.emplace(nd, w);
            }
        }
    }
    return out;
}

double geodesic_distance(const TriangleMesh& mesh, int a, int b) {
    if (b < 0 || b >= mesh.vertex_count()) throw InputError("bad_index", "vertex out of range");
    const int src[] = {a};
    return dijkstra(mesh, src).distance[b];
}

SamplingSet farthest_point_sample(const TriangleMesh& mesh, int count, int seed_vertex) {
    const int nv = mesh.vertex_count();
    if (count < 1 || count > nv)
        throw InputError("bad_sample_count", "sample count " + std::to_string(count) + " outside [1, " +
                                                 std::to_string(nv) + "]");
    if (seed_vertex < 0 || seed_vertex >= nv) throw InputError("bad_index", "seed vertex out of range");

    const auto& V = mesh.vertices();
    std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
    std::vector<int> label(nv, -1);
    std::vector<int> samples;
    samples.reserve(count);

    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    int next = seed_vertex;
    for (int l = 0; l < count; ++l) {
        samples.push_back(next);
        // Incremental multi-source update: only vertices that get closer move.
        dist[next] = 0.0;
        label[next] = l;
        queue.emplace(0.0, next);
        while (!queue.empty()) {
            const auto [d, v] = queue.top();
            queue.pop();
            if (d > dist[v]) continue;
            for (int w : mesh.neighbors(v)) {
                const double nd = d + (V.row(v) - V.row(w)).norm();
                if (nd < dist[w]) {
                    dist[w] = nd;
                    label[w] = l;
                    queue.emplace(nd, w);
                }
            }
        }
        next = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    }

    SamplingSet out;
    out.sample_indices = std::move(samples);
    // Fill distance over vertices and face barycenters, so a saturated sample
    // set still reports the hole radius inside faces.
    double fill = *std::max_element(dist.begin(), dist.end());
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Eigen::RowVector3d b = (V.row(mesh.faces()(f, 0)) + V.row(mesh.faces()(f, 1)) + V.row(mesh.faces()(f, 2))) / 3.0;
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 3; ++k) {
            const int v = mesh.faces()(f, k);
            best = std::min(best, dist[v] + (b - V.row(v)).norm());
        }
        fill = std::max(fill, best);
    }
    out.fill_distance = fill;
    out.mesh_vertex_count = nv;
    out.voronoi_areas = Eigen::VectorXd::Zero(count);
    for (int f = 0; f < mesh.face_count(); ++f)
        for (int k = 0; k < 3; ++k) out.voronoi_areas[label[mesh.faces()(f, k)]] += mesh.face_area(f) / 3.0;
    return out;
}

Vertices sample_points(const TriangleMesh& mesh, const SamplingSet& samples) {
    if (samples.mesh_vertex_count != mesh.vertex_count())
        throw InputError("sample_mismatch", "sample set belongs to a different mesh");
    Vertices out(samples.size(), 3);
    for (int l = 0; l < samples.size(); ++l) out.row(l) = mesh.vertices().row(samples.sample_indices[l]);
    return out;
}

}  // namespace cpd
