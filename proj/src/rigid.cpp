#include "cpd/rigid.hpp"

namespace cpd {

EnergyResult procrustes_energy(const TriangleMesh& mesh, const SamplingSet& samples,
                               const Eigen::Ref<const Vertices>& images) {
    if (images.rows() != samples.size())
        throw InputError("sample_mismatch", "image count does not match sample count");
    const Vertices q = sample_points(mesh, samples);
    const auto fit = detail::weighted_rigid_fit<double>(q, images, samples.voronoi_areas);
    return {std::sqrt(std::max(fit.residual_sq, 0.0)), fit.motion, fit.degenerate};
}

}  // namespace cpd
