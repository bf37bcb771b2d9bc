#pragma once

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cpd/mesh.hpp"
#include "cpd/mobius.hpp"
#include "cpd/moser.hpp"
#include "cpd/rigid.hpp"
#include "cpd/tps.hpp"
#include "cpd/uniformize.hpp"

namespace cpd {

/// Which refinements follow the Mobius candidate. The Mobius stage itself
/// always runs.
struct Stages {
    bool tps = true;
    bool moser = true;

    bool operator==(const Stages&) const = default;
};

struct RunConfig {
    int samples = 256;
    int angles = 32;
    int max_extrema = 8;
    /// Target edge length of the disk mesh used by the Moser stage.
    double h = 0.03;
    int n_steps = 32;
    /// Density floor as a fraction of the mean density (1/pi on the unit disk).
    double eps_floor = 1e-3;
    ChiProfile chi_profile = ChiProfile::atanh;
    Stages stages;
    bool symmetrize = true;
    /// Golden-section refinement of the angle around the best candidate.
    bool refine_theta = false;
    /// Rank all candidates by their Mobius-only energy and run the later
    /// stages on the best `refine_top` only. 0 runs every stage on every
    /// candidate.
    int refine_top = 0;
    int jobs = 1;

    /// Throws InputError "bad_config" on a non-positive field.
    void validate() const;
};

/// A surface after unit-area normalization with everything the pipeline
/// needs from it; immutable once built.
struct PreparedSurface {
    std::string id;
    TriangleMesh mesh;
    DiskParam param;
    SamplingSet samples;
    ExtremaSet extrema;
    /// Conformal density resampled on the Moser disk mesh; empty unless
    /// prepared with a workspace.
    ElementDensity disk_density;
};

class MoserWorkspace;

PreparedSurface prepare_surface(const TriangleMesh& mesh, const RunConfig& cfg, std::string id = {},
                                const MoserWorkspace* workspace = nullptr);

/// Shared disk mesh and factorized Poisson operator for the Moser stage.
class MoserWorkspace {
public:
    explicit MoserWorkspace(double h);
    MoserWorkspace(const MoserWorkspace&) = delete;
    MoserWorkspace& operator=(const MoserWorkspace&) = delete;

    const DiskFEMesh& mesh() const { return *mesh_; }
    const NeumannPoisson& poisson() const { return *poisson_; }

private:
    std::unique_ptr<DiskFEMesh> mesh_;
    std::unique_ptr<NeumannPoisson> poisson_;
};

struct StageFlags {
    bool tps = false;
    bool moser = false;
    bool degenerate = false;
    /// Some image point fell outside the target triangulation by more than
    /// 1e-6 and was clamped onto the nearest face.
    bool clamped = false;
    /// The TPS fit was skipped because the system was ill-conditioned.
    bool tps_failed = false;
    /// zeta flipped some cells of a test grid; the map is kept.
    bool tps_noninjective = false;

    bool operator==(const StageFlags&) const = default;
};

struct CorrespondenceMap {
    std::string source_id, target_id;
    /// q_l on the normalized source and their Voronoi areas.
    Vertices sample_points;
    Eigen::VectorXd sample_areas;
    /// C(q_l) on the normalized target, with the face and barycentric
    /// coordinates it was lifted from.
    Vertices image_points;
    std::vector<int> image_faces;
    Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> image_bary;
    Candidate candidate;
    double dpc = 0.0;
    RigidMotiond motion;
    StageFlags flags;
    /// True when the symmetrized result came from the target-to-source run.
    bool reversed = false;

    int size() const { return static_cast<int>(sample_points.rows()); }
};

/// The planar part of a candidate correspondence, phi o zeta o m, with the
/// disk of the source mapped into the disk of the target.
class StagedMap {
public:
    StagedMap(const PreparedSurface& source, const PreparedSurface& target, const Mobiusd& mobius,
              const RunConfig& cfg, const MoserWorkspace* workspace);

    Complex operator()(Complex z) const;

    const StageFlags& flags() const { return flags_; }
    const TpsMapd& tps() const { return tps_; }
    const MoserFlow* flow() const { return flow_ ? &*flow_ : nullptr; }

private:
    Mobiusd mobius_;
    TpsMapd tps_;
    ChiProfile profile_;
    int n_steps_;
    std::optional<MoserFlow> flow_;
    StageFlags flags_;
};

/// Lifts planar points in the target disk to the target surface.
CorrespondenceMap lift_correspondence(const PreparedSurface& source, const PreparedSurface& target,
                                      const std::vector<Complex>& planar_images);

CorrespondenceMap evaluate_candidate(const PreparedSurface& source, const PreparedSurface& target,
                                     const Candidate& candidate, const RunConfig& cfg,
                                     const MoserWorkspace* workspace);

/// Best candidate from source to target, one direction.
CorrespondenceMap best_correspondence(const PreparedSurface& source, const PreparedSurface& target,
                                      const RunConfig& cfg, const MoserWorkspace* workspace);

/// Best candidate; with cfg.symmetrize the smaller of both directions.
CorrespondenceMap continuous_procrustes(const PreparedSurface& a, const PreparedSurface& b, const RunConfig& cfg,
                                        const MoserWorkspace* workspace);

CorrespondenceMap continuous_procrustes(const TriangleMesh& a, const TriangleMesh& b, const RunConfig& cfg);

/// Procrustes energy recomputed from the stored samples and images.
EnergyResult recompute_energy(const CorrespondenceMap& map);

/// Per-sample residual |R q_l - C q_l|.
Eigen::VectorXd sample_residuals(const CorrespondenceMap& map);

/// Per-face ratio of singular values of the differential of the
/// correspondence extended to every source vertex, in orthonormal frames of
/// the source and image triangles. Degenerate images give +inf.
Eigen::VectorXd conformal_distortion(const PreparedSurface& source, const PreparedSurface& target,
                                     const Candidate& candidate, const RunConfig& cfg,
                                     const MoserWorkspace* workspace);

struct PairSummary {
    int i = 0, j = 0;
    double dpc = 0.0;
    bool reversed = false;
    Orientation orientation = Orientation::preserving;
    StageFlags flags;
    std::string error;
};

struct DistanceMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
    std::vector<PairSummary> pairs;
};

/// All unordered pairs, in parallel over cfg.jobs threads. A failing pair is
/// logged and stored as NaN.
DistanceMatrix distance_matrix(const std::vector<TriangleMesh>& meshes, const std::vector<std::string>& ids,
                               const RunConfig& cfg);

}  // namespace cpd
