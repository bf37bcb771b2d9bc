#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cpd/pipeline.hpp"
#include "cpd/synthetic.hpp"

using namespace cpd;

namespace {

// Small meshes and a coarse configuration keep these tests quick; the
// acceptance binary runs the full-size versions.
RunConfig small_config() {
    RunConfig cfg;
    cfg.samples = 128;
    cfg.angles = 16;
    cfg.h = 0.06;
    cfg.n_steps = 16;
    return cfg;
}

TriangleMesh shape_a() { return synthetic::bumpy_disk(14, {{0.3, 0.1, 0.35, 0.25}, {-0.3, -0.2, 0.2, 0.22}}); }
TriangleMesh shape_b() { return synthetic::bumpy_disk(14, {{-0.1, 0.35, 0.4, 0.3}}); }

Candidate identity_candidate() { return {Mobiusd::identity(), Complex(0), Complex(0), 0}; }

double motion_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace

TEST_CASE("config validation") {
    RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    for (auto bad : {+[](RunConfig& c) { c.samples = 0; }, +[](RunConfig& c) { c.angles = -1; },
                     +[](RunConfig& c) { c.h = 0.0; }, +[](RunConfig& c) { c.n_steps = 0; },
                     +[](RunConfig& c) { c.eps_floor = 0.0; }, +[](RunConfig& c) { c.jobs = 0; },
                     +[](RunConfig& c) { c.max_extrema = 0; }}) {
        RunConfig c;
        bad(c);
        CHECK_THROWS_AS(c.validate(), InputError);
    }
}

TEST_CASE("identity candidate on the same surface") {
    const RunConfig cfg = small_config();
    const MoserWorkspace ws(cfg.h);
    const PreparedSurface m = prepare_surface(shape_a(), cfg, "a", &ws);

    RunConfig mobius_only = cfg;
    mobius_only.stages = {false, false};
    const CorrespondenceMap plain = evaluate_candidate(m, m, identity_candidate(), mobius_only, &ws);
    CHECK(plain.dpc < 1e-6);
    CHECK(!plain.flags.tps);
    CHECK(!plain.flags.moser);

    const CorrespondenceMap staged = evaluate_candidate(m, m, identity_candidate(), cfg, &ws);
    CHECK(staged.dpc < 0.05);
    CHECK(staged.flags.moser);

    for (const auto* c : {&plain, &staged}) {
        CHECK(c->size() == cfg.samples);
        CHECK(c->image_bary.minCoeff() >= 0.0);
        CHECK((c->image_bary.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK(std::abs(recompute_energy(*c).dpc - c->dpc) < 1e-10);
        CHECK(sample_residuals(*c).size() == cfg.samples);
    }
}

TEST_CASE("self distance and congruent copies") {
    const RunConfig cfg = small_config();
    const TriangleMesh a = shape_a();

    const CorrespondenceMap self = continuous_procrustes(a, a, cfg);
    CHECK(self.dpc < 0.05);
    CHECK(motion_angle(self.motion.U, Eigen::Matrix3d::Identity()) < 5.0 * std::numbers::pi / 180.0);

    std::mt19937_64 rng(11);
    const RigidMotiond R = synthetic::random_motion(rng, false);
    const CorrespondenceMap copy = continuous_procrustes(a, synthetic::transformed(a, R), cfg);
    CHECK(copy.dpc < 0.05);
    const Eigen::Matrix3d U = copy.reversed ? copy.motion.U.transpose() : copy.motion.U;
    CHECK(motion_angle(U, R.U) < 5.0 * std::numbers::pi / 180.0);
    CHECK(std::abs(recompute_energy(copy).dpc - copy.dpc) < 1e-10);
}

TEST_CASE("a mirror image is matched by a reversing candidate") {
    const RunConfig cfg = small_config();
    const TriangleMesh a = shape_a();
    const CorrespondenceMap r = continuous_procrustes(a, synthetic::mirrored(a), cfg);
    CHECK(r.dpc < 0.05);
    CHECK(r.candidate.map.reversing());
    CHECK(r.motion.is_reflection());
}

TEST_CASE("symmetrized distance") {
    const RunConfig cfg = small_config();
    const MoserWorkspace ws(cfg.h);
    const PreparedSurface a = prepare_surface(shape_a(), cfg, "a", &ws);
    const PreparedSurface b = prepare_surface(shape_b(), cfg, "b", &ws);

    const CorrespondenceMap ab = continuous_procrustes(a, b, cfg, &ws), ba = continuous_procrustes(b, a, cfg, &ws);
    CHECK(ab.dpc == ba.dpc);
    CHECK(ab.reversed != ba.reversed);

    RunConfig one_way = cfg;
    one_way.symmetrize = false;
    const double forward = best_correspondence(a, b, one_way, &ws).dpc;
    const double backward = best_correspondence(b, a, one_way, &ws).dpc;
    CHECK(ab.dpc == std::min(forward, backward));
    CHECK(ab.dpc > 0.0);
}

TEST_CASE("invariance under rigid motion and scale") {
    RunConfig cfg = small_config();
    cfg.stages = {true, false};
    const TriangleMesh a = shape_a(), b = shape_b();
    const double base = continuous_procrustes(a, b, cfg).dpc;

    std::mt19937_64 rng(12);
    for (bool reflect : {false, true}) {
        const TriangleMesh moved = synthetic::transformed(a, synthetic::random_motion(rng, reflect, 5.0));
        CHECK(continuous_procrustes(moved, b, cfg).dpc == doctest::Approx(base).epsilon(1e-3));
    }
    Vertices scaled = a.vertices() * 3.7;
    CHECK(continuous_procrustes(a.with_vertices(scaled), b, cfg).dpc == doctest::Approx(base).epsilon(1e-3));
}

TEST_CASE("distance matrix") {
    RunConfig cfg = small_config();
    cfg.jobs = 2;
    std::mt19937_64 rng(13);
    const TriangleMesh a = shape_a();
    const std::vector<TriangleMesh> copies{a, synthetic::transformed(a, synthetic::random_motion(rng, false)),
                                           synthetic::transformed(a, synthetic::random_motion(rng, false))};
    const DistanceMatrix d = distance_matrix(copies, {"x", "y", "z"}, cfg);
    REQUIRE(d.values.rows() == 3);
    CHECK(d.values.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK((d.values - d.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.values.allFinite());
    CHECK(d.values.maxCoeff() < 0.05);
    CHECK(d.pairs.size() == 3);
    for (const auto& p : d.pairs) CHECK(p.error.empty());

    CHECK_THROWS_AS(distance_matrix({a}, {"x"}, cfg), InputError);
}

TEST_CASE("conformal distortion of the identity") {
    const RunConfig cfg = small_config();
    const MoserWorkspace ws(cfg.h);
    const PreparedSurface m = prepare_surface(shape_a(), cfg, "a", &ws);
    RunConfig mobius_only = cfg;
    mobius_only.stages = {false, false};
    const Eigen::VectorXd d = conformal_distortion(m, m, identity_candidate(), mobius_only, &ws);
    CHECK(d.size() == m.mesh.face_count());
    CHECK(d.minCoeff() >= 1.0 - 1e-12);
    CHECK(d.maxCoeff() < 1.0 + 1e-6);
}

TEST_CASE("triangle inequality audit") {
    RunConfig cfg = small_config();
    cfg.stages = {true, false};
    const TriangleMesh a = shape_a(), b = shape_b(), c = synthetic::bumpy_disk(14, {{0.0, 0.0, 0.3, 0.35}});
    const double ab = continuous_procrustes(a, b, cfg).dpc, bc = continuous_procrustes(b, c, cfg).dpc,
                 ac = continuous_procrustes(a, c, cfg).dpc;
    // Reported only: the computed quantity is a dissimilarity.
    MESSAGE("d(a,c) - d(a,b) - d(b,c) = " << ac - ab - bc);
    CHECK(std::isfinite(ac - ab - bc));
}
