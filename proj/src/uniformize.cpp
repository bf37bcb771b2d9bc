#include "cpd/uniformize.hpp"

#include <Eigen/Geometry>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cpd {

// ---------------------------------------------------------------------------
// PlanarLocator

PlanarLocator::PlanarLocator(Points2 coords, Faces faces) : coords_(std::move(coords)), faces_(std::move(faces)) {
    const int nf = static_cast<int>(faces_.rows());
    const Eigen::RowVector2d lo = coords_.colwise().minCoeff();
    const Eigen::RowVector2d hi = coords_.colwise().maxCoeff();
    const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-12});
    const int per_side = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nf) / 2.0))));
    cell_ = extent / per_side * (1.0 + 1e-9);
    x0_ = lo[0];
    y0_ = lo[1];
    nx_ = std::max(1, static_cast<int>(std::ceil((hi[0] - lo[0]) / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil((hi[1] - lo[1]) / cell_)));

    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(nx_) * ny_);
    for (int f = 0; f < nf; ++f) {
        double bx0 = std::numeric_limits<double>::max(), by0 = bx0, bx1 = -bx0, by1 = -bx0;
        for (int k = 0; k < 3; ++k) {
            const auto p = coords_.row(faces_(f, k));
            bx0 = std::min(bx0, p[0]);
            bx1 = std::max(bx1, p[0]);
            by0 = std::min(by0, p[1]);
            by1 = std::max(by1, p[1]);
        }
        const int ix0 = std::clamp(static_cast<int>((bx0 - x0_) / cell_), 0, nx_ - 1);
        const int ix1 = std::clamp(static_cast<int>((bx1 - x0_) / cell_), 0, nx_ - 1);
        const int iy0 = std::clamp(static_cast<int>((by0 - y0_) / cell_), 0, ny_ - 1);
        const int iy1 = std::clamp(static_cast<int>((by1 - y0_) / cell_), 0, ny_ - 1);
        for (int iy = iy0; iy <= iy1; ++iy)
            for (int ix = ix0; ix <= ix1; ++ix) buckets[cell_index(ix, iy)].push_back(f);
    }
    cell_offsets_.assign(buckets.size() + 1, 0);
    for (std::size_t c = 0; c < buckets.size(); ++c)
        cell_offsets_[c + 1] = cell_offsets_[c] + static_cast<int>(buckets[c].size());
    cell_faces_.reserve(cell_offsets_.back());
    for (const auto& b : buckets) cell_faces_.insert(cell_faces_.end(), b.begin(), b.end());
}

Eigen::Vector3d PlanarLocator::barycentric(int f, Complex z) const {
    const Eigen::Vector2d a = coords_.row(faces_(f, 0)), b = coords_.row(faces_(f, 1)), c = coords_.row(faces_(f, 2));
    const Eigen::Vector2d p(z.real(), z.imag());
    const double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    const double l1 = ((p - a).x() * (c - a).y() - (p - a).y() * (c - a).x()) / det;
    const double l2 = ((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x()) / det;
    return {1.0 - l1 - l2, l1, l2};
}

double PlanarLocator::distance_to_face(int f, Complex z, Eigen::Vector3d& bary) const {
    bary = barycentric(f, z);
    if (bary.minCoeff() >= 0.0) return 0.0;
    const Eigen::Vector2d p(z.real(), z.imag());
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d a = coords_.row(faces_(f, k)), b = coords_.row(faces_(f, (k + 1) % 3));
        const Eigen::Vector2d ab = b - a;
        const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
        const double d = (a + s * ab - p).norm();
        if (d < best) {
            best = d;
            bary.setZero();
            bary[k] = 1.0 - s;
            bary[(k + 1) % 3] = s;
        }
    }
    return best;
}

PlanarLocator::Location PlanarLocator::locate(Complex z) const {
    constexpr double kInsideTol = 1e-12;
    const int cx = static_cast<int>(std::floor((z.real() - x0_) / cell_));
    const int cy = static_cast<int>(std::floor((z.imag() - y0_) / cell_));

    Location loc;
    if (cx >= 0 && cx < nx_ && cy >= 0 && cy < ny_) {
        const int c = cell_index(cx, cy);
        for (int i = cell_offsets_[c]; i < cell_offsets_[c + 1]; ++i) {
            const int f = cell_faces_[i];
            const Eigen::Vector3d b = barycentric(f, z);
            if (b.minCoeff() >= -kInsideTol) {
                loc.face = f;
                loc.bary = b.cwiseMax(0.0) / b.cwiseMax(0.0).sum();
                loc.inside = true;
                return loc;
            }
        }
    }

    // Nearest face by expanding rings of cells around the (clamped) cell.
    const int sx = std::clamp(cx, 0, nx_ - 1), sy = std::clamp(cy, 0, ny_ - 1);
    const double outside = std::max({x0_ - z.real(), z.real() - (x0_ + nx_ * cell_), y0_ - z.imag(),
                                     z.imag() - (y0_ + ny_ * cell_), 0.0});
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector3d bary;
    const int max_ring = std::max(nx_, ny_);
    for (int r = 0; r <= max_ring; ++r) {
        for (int iy = sy - r; iy <= sy + r; ++iy)
            for (int ix = sx - r; ix <= sx + r; ++ix) {
                if (std::max(std::abs(ix - sx), std::abs(iy - sy)) != r) continue;
                if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) continue;
                const int c = cell_index(ix, iy);
                for (int i = cell_offsets_[c]; i < cell_offsets_[c + 1]; ++i) {
                    const int f = cell_faces_[i];
                    const double d = distance_to_face(f, z, bary);
                    if (d < best) {
                        best = d;
                        loc.face = f;
                        loc.bary = bary;
                    }
                }
            }
        if (loc.face >= 0 && best <= r * cell_ + outside) break;
    }
    loc.inside = best <= kInsideTol;
    loc.distance = best;
    return loc;
}

// ---------------------------------------------------------------------------
// Flattening

Eigen::VectorXd signed_areas(const Points2& coords, const Faces& faces) {
    Eigen::VectorXd out(faces.rows());
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        const Eigen::Vector2d a = coords.row(faces(f, 0)), b = coords.row(faces(f, 1)), c = coords.row(faces(f, 2));
        out[f] = 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
    }
    return out;
}

DiskParam flatten_to_disk(const TriangleMesh& mesh) {
    const int nv = mesh.vertex_count();
    const auto& V = mesh.vertices();
    const auto& F = mesh.faces();
    const auto& loop = mesh.boundary_loop();

    Points2 uv = Points2::Zero(nv, 2);
    {
        std::vector<double> arclength(loop.size() + 1, 0.0);
        for (std::size_t i = 0; i < loop.size(); ++i)
            arclength[i + 1] = arclength[i] + (V.row(loop[(i + 1) % loop.size()]) - V.row(loop[i])).norm();
        for (std::size_t i = 0; i < loop.size(); ++i) {
            const double angle = 2.0 * std::numbers::pi * arclength[i] / arclength.back();
            uv.row(loop[i]) << std::cos(angle), std::sin(angle);
        }
    }

    // Interior unknowns.
    std::vector<int> index(nv, -1);
    int ni = 0;
    for (int v = 0; v < nv; ++v)
        if (!mesh.is_boundary(v)) index[v] = ni++;

    if (ni > 0) {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(9 * mesh.face_count());
        Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(ni, 2);
        for (int f = 0; f < mesh.face_count(); ++f) {
            for (int k = 0; k < 3; ++k) {
                const int o = F(f, k), i = F(f, (k + 1) % 3), j = F(f, (k + 2) % 3);
                const Eigen::Vector3d ei = V.row(i) - V.row(o), ej = V.row(j) - V.row(o);
                const double w = 0.5 * ei.dot(ej) / ei.cross(ej).norm();  // half cotangent at o
                const int ii = index[i], jj = index[j];
                if (ii >= 0) triplets.emplace_back(ii, ii, w);
                if (jj >= 0) triplets.emplace_back(jj, jj, w);
                if (ii >= 0 && jj >= 0) {
                    triplets.emplace_back(ii, jj, -w);
                    triplets.emplace_back(jj, ii, -w);
                } else if (ii >= 0) {
                    rhs.row(ii) += w * uv.row(j);
                } else if (jj >= 0) {
                    rhs.row(jj) += w * uv.row(i);
                }
            }
        }
        Eigen::SparseMatrix<double> L(ni, ni);
        L.setFromTriplets(triplets.begin(), triplets.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
        if (solver.info() != Eigen::Success)
            throw NumericalError("singular_laplacian", "cotangent Laplacian factorization failed");
        const Eigen::MatrixX2d sol = solver.solve(rhs);
        if (solver.info() != Eigen::Success || !sol.allFinite())
            throw NumericalError("singular_laplacian", "cotangent Laplacian solve failed");
        for (int v = 0; v < nv; ++v)
            if (index[v] >= 0) uv.row(v) = sol.row(index[v]);
    }

    Eigen::VectorXd area2d = signed_areas(uv, F);
    const int flipped = static_cast<int>((area2d.array() <= 0.0).count());
    if (flipped > 0)
        throw NumericalError("non_bijective_flattening",
                             std::to_string(flipped) + " faces flipped in the disk flattening");

    DiskParam out{mesh, uv, mesh.face_areas().cwiseQuotient(area2d), area2d, PlanarLocator(uv, F)};
    return out;
}

double conformal_density_at(const DiskParam& param, Complex z) {
    if (std::abs(z) > 1.0 + 1e-9) throw InputError("outside_disk", "density query outside the unit disk");
    return param.face_density[param.locator.locate(z).face];
}

Eigen::VectorXd vertex_density(const DiskParam& param) {
    const auto& mesh = param.surface;
    Eigen::VectorXd out(mesh.vertex_count());
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        double mass = 0.0, area = 0.0;
        for (int f : mesh.incident_faces(v)) {
            mass += mesh.face_area(f);
            area += param.planar_areas[f];
        }
        out[v] = mass / area;
    }
    return out;
}

Eigen::VectorXd hyperbolic_density(const DiskParam& param) {
    Eigen::VectorXd out = vertex_density(param);
    for (int v = 0; v < out.size(); ++v) {
        if (param.surface.is_boundary(v)) {
            out[v] = 0.0;
            continue;
        }
        const double s = 1.0 - param.planar_coords.row(v).squaredNorm();
        out[v] *= s * s;
    }
    return out;
}

ExtremaSet find_extrema(const DiskParam& param, int max_extrema) {
    const auto& mesh = param.surface;
    const int nv = mesh.vertex_count();
    const Eigen::VectorXd field = hyperbolic_density(param);

    Eigen::VectorXd vertex_area = Eigen::VectorXd::Zero(nv);
    for (int f = 0; f < mesh.face_count(); ++f)
        for (int k = 0; k < 3; ++k) vertex_area[mesh.faces()(f, k)] += param.planar_areas[f] / 3.0;

    // One smoothing pass over the closed 1-ring.
    Eigen::VectorXd smooth(nv);
    for (int v = 0; v < nv; ++v) {
        double acc = vertex_area[v] * field[v], wsum = vertex_area[v];
        for (int u : mesh.neighbors(v)) {
            acc += vertex_area[u] * field[u];
            wsum += vertex_area[u];
        }
        smooth[v] = acc / wsum;
    }

    std::vector<double> interior;
    for (int v = 0; v < nv; ++v)
        if (!mesh.is_boundary(v)) interior.push_back(smooth[v]);
    ExtremaSet out;
    if (interior.empty()) return out;
    std::nth_element(interior.begin(), interior.begin() + interior.size() / 2, interior.end());
    const double median = interior[interior.size() / 2];

    for (int v = 0; v < nv; ++v) {
        if (mesh.is_boundary(v)) continue;
        bool is_max = true, is_min = true;
        for (int u : mesh.neighbors(v)) {
            is_max = is_max && smooth[v] > smooth[u];
            is_min = is_min && smooth[v] < smooth[u];
        }
        if (is_max || is_min)
            out.extrema.push_back({v, param.position(v), is_max ? ExtremumKind::max : ExtremumKind::min, smooth[v]});
    }
    std::stable_sort(out.extrema.begin(), out.extrema.end(), [&](const Extremum& a, const Extremum& b) {
        return std::abs(a.value - median) > std::abs(b.value - median);
    });
    if (static_cast<int>(out.extrema.size()) > max_extrema) out.extrema.resize(std::max(0, max_extrema));
    return out;
}

}  // namespace cpd
