#include "cpd/pipeline.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace cpd {

namespace {

constexpr double kClampTol = 1e-6;
constexpr double kControlRadius = 0.99;

// Runs body(i) for i in [0, n) on up to `jobs` threads. The first exception
// is rethrown after all workers stop.
template <class Body>
void parallel_for(int n, int jobs, Body&& body) {
    jobs = std::clamp(jobs, 1, std::max(n, 1));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

std::vector<Complex> extremum_positions(const ExtremaSet& set) {
    std::vector<Complex> out;
    for (const auto& e : set.extrema) out.push_back(e.position);
    return out;
}

// Index of the smallest dpc; the earliest wins ties.
int argmin_dpc(const std::vector<double>& values) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(values.size()); ++i)
        if (!std::isnan(values[i]) && (best < 0 || values[i] < values[best])) best = i;
    return best;
}

}  // namespace

void RunConfig::validate() const {
    const auto require = [](bool ok, const char* field) {
        if (!ok) throw InputError("bad_config", std::string("config field must be positive: ") + field);
    };
    require(samples > 0, "samples");
    require(angles > 0, "angles");
    require(max_extrema > 0, "max_extrema");
    require(h > 0.0 && h < 1.0, "h");
    require(n_steps > 0, "n_steps");
    require(eps_floor > 0.0, "eps_floor");
    require(refine_top >= 0, "refine_top");
    require(jobs > 0, "jobs");
}

MoserWorkspace::MoserWorkspace(double h)
    : mesh_(std::make_unique<DiskFEMesh>(build_disk_mesh(h))),
      poisson_(std::make_unique<NeumannPoisson>(*mesh_)) {}

PreparedSurface prepare_surface(const TriangleMesh& mesh, const RunConfig& cfg, std::string id,
                                const MoserWorkspace* workspace) {
    TriangleMesh normalized = normalize_area(mesh);
    DiskParam param = flatten_to_disk(normalized);
    PreparedSurface out{std::move(id), std::move(normalized), std::move(param), {}, {}, {}};
    out.samples = farthest_point_sample(out.mesh, std::min(cfg.samples, out.mesh.vertex_count()));
    out.extrema = find_extrema(out.param, cfg.max_extrema);
    if (workspace) {
        const DiskFEMesh& fe = workspace->mesh();
        out.disk_density = resample_density(out.param.locator, out.param.face_density, fe,
                                            cfg.eps_floor / fe.areas.sum());
    }
    spdlog::debug("prepared '{}': {} vertices, {} samples, {} extrema", out.id, out.mesh.vertex_count(),
                  out.samples.size(), out.extrema.size());
    return out;
}

// ---------------------------------------------------------------------------

StagedMap::StagedMap(const PreparedSurface& source, const PreparedSurface& target, const Mobiusd& mobius,
                     const RunConfig& cfg, const MoserWorkspace* workspace)
    : mobius_(mobius), profile_(cfg.chi_profile), n_steps_(cfg.n_steps) {
    if (cfg.stages.tps) {
        std::vector<Complex> moved;
        for (const auto& e : source.extrema.extrema) moved.push_back(mobius_(e.position));
        std::vector<std::pair<Complex, Complex>> controls;
        for (const auto& [p, q] : mutually_closest_pairs(moved, extremum_positions(target.extrema)))
            if (std::abs(p) <= kControlRadius && std::abs(q) <= kControlRadius)
                controls.emplace_back(chi(p, profile_), chi(q, profile_));
        if (controls.size() >= 2) {
            try {
                tps_ = fit_tps(controls);
                flags_.tps = true;
                flags_.tps_noninjective = zeta_flipped_cells(tps_, profile_) > 0;
            } catch (const NumericalError& e) {
                spdlog::debug("TPS skipped: {}", e.what());
                flags_.tps_failed = true;
            }
        }
    }

    if (cfg.stages.moser) {
        if (!workspace) throw InputError("missing_workspace", "the Moser stage needs a disk mesh");
        const DiskFEMesh& fe = workspace->mesh();
        const double eps = cfg.eps_floor / fe.areas.sum();

        // Source area density carried to the target disk by zeta o m.
        Points2 moved(source.param.planar_coords.rows(), 2);
        for (int v = 0; v < moved.rows(); ++v) {
            Complex w = mobius_(source.param.position(v));
            if (flags_.tps) w = apply_zeta(tps_, w, profile_);
            moved.row(v) << w.real(), w.imag();
        }
        const Eigen::VectorXd moved_areas = signed_areas(moved, source.mesh.faces()).cwiseAbs();
        const Eigen::VectorXd surface_areas = source.mesh.face_areas();
        Eigen::VectorXd density(moved_areas.size());
        for (Eigen::Index f = 0; f < density.size(); ++f)
            density[f] = moved_areas[f] > 0.0 ? surface_areas[f] / moved_areas[f] : 0.0;
        const PlanarLocator moved_locator(std::move(moved), source.mesh.faces());
        ElementDensity mu = resample_density(moved_locator, density, fe, eps);

        ElementDensity nu = target.disk_density.values.size() == fe.face_count()
                                ? target.disk_density
                                : resample_density(target.param.locator, target.param.face_density, fe, eps);
        FlowField field = workspace->poisson().solve(mu.values - nu.values);
        flow_.emplace(fe, std::move(field), std::move(mu), std::move(nu));
        flags_.moser = true;
    }
}

Complex StagedMap::operator()(Complex z) const {
    Complex w = mobius_(z);
    if (flags_.tps) w = apply_zeta(tps_, w, profile_);
    if (flow_) w = flow_->flow(w, n_steps_);
    return w;
}

// ---------------------------------------------------------------------------

CorrespondenceMap lift_correspondence(const PreparedSurface& source, const PreparedSurface& target,
                                      const std::vector<Complex>& planar_images) {
    if (static_cast<int>(planar_images.size()) != source.samples.size())
        throw InputError("sample_mismatch", "image count does not match sample count");
    const int n = source.samples.size();
    CorrespondenceMap out;
    out.source_id = source.id;
    out.target_id = target.id;
    out.sample_points = sample_points(source.mesh, source.samples);
    out.sample_areas = source.samples.voronoi_areas;
    out.image_points.resize(n, 3);
    out.image_faces.resize(n);
    out.image_bary.resize(n, 3);
    const Vertices& V = target.mesh.vertices();
    const Faces& F = target.mesh.faces();
    for (int l = 0; l < n; ++l) {
        const auto loc = target.param.locator.locate(planar_images[l]);
        if (loc.face < 0) throw NumericalError("point_location", "point location failed on the target disk");
        if (!loc.inside && loc.distance > kClampTol) out.flags.clamped = true;
        out.image_faces[l] = loc.face;
        out.image_bary.row(l) = loc.bary.transpose();
        out.image_points.row(l) =
            loc.bary[0] * V.row(F(loc.face, 0)) + loc.bary[1] * V.row(F(loc.face, 1)) + loc.bary[2] * V.row(F(loc.face, 2));
    }
    return out;
}

CorrespondenceMap evaluate_candidate(const PreparedSurface& source, const PreparedSurface& target,
                                     const Candidate& candidate, const RunConfig& cfg,
                                     const MoserWorkspace* workspace) {
    const StagedMap map(source, target, candidate.map, cfg, workspace);
    std::vector<Complex> planar;
    planar.reserve(source.samples.size());
    for (int v : source.samples.sample_indices) planar.push_back(map(source.param.position(v)));

    CorrespondenceMap out = lift_correspondence(source, target, planar);
    const bool clamped = out.flags.clamped;
    out.flags = map.flags();
    out.flags.clamped = clamped;
    out.candidate = candidate;
    const EnergyResult energy = recompute_energy(out);
    out.dpc = energy.dpc;
    out.motion = energy.motion;
    out.flags.degenerate = energy.degenerate;
    return out;
}

EnergyResult recompute_energy(const CorrespondenceMap& map) {
    const auto fit = detail::weighted_rigid_fit<double>(map.sample_points, map.image_points, map.sample_areas);
    return {std::sqrt(std::max(fit.residual_sq, 0.0)), fit.motion, fit.degenerate};
}

Eigen::VectorXd sample_residuals(const CorrespondenceMap& map) {
    return (map.motion.apply_rows(map.sample_points) - map.image_points).rowwise().norm();
}

namespace {

CorrespondenceMap refine_angle(const PreparedSurface& source, const PreparedSurface& target,
                               CorrespondenceMap best, const RunConfig& cfg, const MoserWorkspace* workspace) {
    const Candidate base = best.candidate;
    const auto evaluate = [&](double theta) {
        Candidate c = base;
        c.map = from_point_angle(base.source, base.target, theta, base.map.orientation());
        return evaluate_candidate(source, target, c, cfg, workspace);
    };
    const double step = 2.0 * std::numbers::pi / cfg.angles;
    const double center = 2.0 * std::numbers::pi * base.angle_index / cfg.angles;
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = center - step, hi = center + step;
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    CorrespondenceMap f1 = evaluate(x1), f2 = evaluate(x2);
    for (int it = 0; it < 20; ++it) {
        if (f1.dpc <= f2.dpc) {
            hi = x2;
            x2 = x1;
            f2 = std::move(f1);
            x1 = hi - ratio * (hi - lo);
            f1 = evaluate(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = std::move(f2);
            x2 = lo + ratio * (hi - lo);
            f2 = evaluate(x2);
        }
    }
    CorrespondenceMap& refined = f1.dpc <= f2.dpc ? f1 : f2;
    return refined.dpc < best.dpc ? std::move(refined) : std::move(best);
}

}  // namespace

CorrespondenceMap best_correspondence(const PreparedSurface& source, const PreparedSurface& target,
                                      const RunConfig& cfg, const MoserWorkspace* workspace) {
    cfg.validate();
    const CandidateSet set = candidate_set(source.extrema, target.extrema, cfg.angles);
    const int n = static_cast<int>(set.candidates.size());
    if (n == 0) throw NumericalError("no_candidates", "no Mobius candidates");
    if (set.fallback) spdlog::debug("'{}' -> '{}': empty extrema set, centered candidates", source.id, target.id);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const bool staged = cfg.stages.tps || cfg.stages.moser;
    if (staged && cfg.refine_top > 0 && cfg.refine_top < n) {
        RunConfig mobius_only = cfg;
        mobius_only.stages = {false, false};
        std::vector<double> coarse(n);
        parallel_for(n, cfg.jobs, [&](int i) {
            coarse[i] = evaluate_candidate(source, target, set.candidates[i], mobius_only, nullptr).dpc;
        });
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return coarse[a] < coarse[b]; });
        order.resize(cfg.refine_top);
        std::sort(order.begin(), order.end());
    }

    const int m = static_cast<int>(order.size());
    std::vector<CorrespondenceMap> results(m);
    std::vector<double> dpc(m, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> errors(m);
    parallel_for(m, cfg.jobs, [&](int k) {
        try {
            results[k] = evaluate_candidate(source, target, set.candidates[order[k]], cfg, workspace);
            dpc[k] = results[k].dpc;
        } catch (const NumericalError& e) {
            errors[k] = e.what();
        }
    });
    const int best = argmin_dpc(dpc);
    if (best < 0) throw NumericalError("all_candidates_failed", "every candidate failed: " + errors.front());
    CorrespondenceMap out = std::move(results[best]);
    if (cfg.refine_theta) out = refine_angle(source, target, std::move(out), cfg, workspace);
    spdlog::debug("'{}' -> '{}': {} candidates, best dpc {:.6g}", source.id, target.id, n, out.dpc);
    return out;
}

CorrespondenceMap continuous_procrustes(const PreparedSurface& a, const PreparedSurface& b, const RunConfig& cfg,
                                        const MoserWorkspace* workspace) {
    CorrespondenceMap forward = best_correspondence(a, b, cfg, workspace);
    if (!cfg.symmetrize) return forward;
    CorrespondenceMap backward = best_correspondence(b, a, cfg, workspace);
    if (backward.dpc < forward.dpc) {
        backward.reversed = true;
        return backward;
    }
    return forward;
}

CorrespondenceMap continuous_procrustes(const TriangleMesh& a, const TriangleMesh& b, const RunConfig& cfg) {
    cfg.validate();
    std::unique_ptr<MoserWorkspace> workspace;
    if (cfg.stages.moser) workspace = std::make_unique<MoserWorkspace>(cfg.h);
    const PreparedSurface pa = prepare_surface(a, cfg, "A", workspace.get());
    const PreparedSurface pb = prepare_surface(b, cfg, "B", workspace.get());
    return continuous_procrustes(pa, pb, cfg, workspace.get());
}

Eigen::VectorXd conformal_distortion(const PreparedSurface& source, const PreparedSurface& target,
                                     const Candidate& candidate, const RunConfig& cfg,
                                     const MoserWorkspace* workspace) {
    const StagedMap map(source, target, candidate.map, cfg, workspace);
    const Vertices& X = source.mesh.vertices();
    const Vertices& V = target.mesh.vertices();
    const Faces& TF = target.mesh.faces();
    Vertices Y(X.rows(), 3);
    for (int v = 0; v < X.rows(); ++v) {
        const auto loc = target.param.locator.locate(map(source.param.position(v)));
        Y.row(v) = loc.bary[0] * V.row(TF(loc.face, 0)) + loc.bary[1] * V.row(TF(loc.face, 1)) +
                   loc.bary[2] * V.row(TF(loc.face, 2));
    }

    // Edge vectors of a triangle in an orthonormal frame of its own plane.
    const auto local = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                          Eigen::Matrix2d& E) {
        const Eigen::Vector3d u = b - a, w = c - a;
        const Eigen::Vector3d n = u.cross(w);
        if (n.norm() <= 1e-14 * u.squaredNorm() || u.norm() == 0.0) return false;
        const Eigen::Vector3d e1 = u.normalized(), e2 = n.normalized().cross(e1);
        E << u.dot(e1), w.dot(e1), u.dot(e2), w.dot(e2);
        return true;
    };

    const Faces& F = source.mesh.faces();
    Eigen::VectorXd out(F.rows());
    for (Eigen::Index f = 0; f < F.rows(); ++f) {
        Eigen::Matrix2d S, T;
        const bool ok = local(X.row(F(f, 0)), X.row(F(f, 1)), X.row(F(f, 2)), S) &&
                        local(Y.row(F(f, 0)), Y.row(F(f, 1)), Y.row(F(f, 2)), T);
        if (!ok) {
            out[f] = std::numeric_limits<double>::infinity();
            continue;
        }
        const Eigen::Vector2d sv = Eigen::JacobiSVD<Eigen::Matrix2d>(T * S.inverse()).singularValues();
        out[f] = sv[1] > 0.0 ? sv[0] / sv[1] : std::numeric_limits<double>::infinity();
    }
    return out;
}

DistanceMatrix distance_matrix(const std::vector<TriangleMesh>& meshes, const std::vector<std::string>& ids,
                               const RunConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(meshes.size());
    if (n < 2) throw InputError("too_few_meshes", "a distance matrix needs at least two meshes");
    if (static_cast<int>(ids.size()) != n) throw InputError("id_mismatch", "one identifier per mesh required");

    std::unique_ptr<MoserWorkspace> workspace;
    if (cfg.stages.moser) workspace = std::make_unique<MoserWorkspace>(cfg.h);
    std::vector<std::optional<PreparedSurface>> prepared(n);
    std::vector<std::string> prep_errors(n);
    parallel_for(n, cfg.jobs, [&](int i) {
        try {
            prepared[i] = prepare_surface(meshes[i], cfg, ids[i], workspace.get());
        } catch (const Error& e) {
            prep_errors[i] = e.what();
            spdlog::error("mesh '{}' failed: {}", ids[i], e.what());
        }
    });

    DistanceMatrix out;
    out.ids = ids;
    out.values = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            PairSummary pair;
            pair.i = i;
            pair.j = j;
            out.pairs.push_back(pair);
        }

    RunConfig pair_cfg = cfg;
    pair_cfg.jobs = 1;
    std::atomic<int> done{0};
    const int total = static_cast<int>(out.pairs.size());
    parallel_for(total, cfg.jobs, [&](int k) {
        PairSummary& pair = out.pairs[k];
        try {
            if (!prepared[pair.i]) throw NumericalError("prepare_failed", prep_errors[pair.i]);
            if (!prepared[pair.j]) throw NumericalError("prepare_failed", prep_errors[pair.j]);
            const CorrespondenceMap map = continuous_procrustes(*prepared[pair.i], *prepared[pair.j], pair_cfg,
                                                                workspace.get());
            pair.dpc = map.dpc;
            pair.reversed = map.reversed;
            pair.orientation = map.candidate.map.orientation();
            pair.flags = map.flags;
        } catch (const Error& e) {
            pair.dpc = std::numeric_limits<double>::quiet_NaN();
            pair.error = e.what();
            spdlog::error("pair '{}' / '{}' failed: {}", ids[pair.i], ids[pair.j], e.what());
        }
        spdlog::info("pair {}/{} done: '{}' / '{}' = {:.6g}", ++done, total, ids[pair.i], ids[pair.j], pair.dpc);
    });
    for (const auto& pair : out.pairs) out.values(pair.i, pair.j) = out.values(pair.j, pair.i) = pair.dpc;
    return out;
}

}  // namespace cpd
