#include "cpd/mobius.hpp"

#include <algorithm>
#include <numbers>

#include "cpd/uniformize.hpp"

namespace cpd {

namespace {

bool same_parameters(const Mobiusd& a, const Mobiusd& b) {
    constexpr double tol = 1e-8;
    if (a.orientation() != b.orientation()) return false;
    double dtheta = std::abs(a.theta() - b.theta());
    dtheta = std::min(dtheta, 2.0 * std::numbers::pi - dtheta);
    return dtheta <= tol && std::abs(a.a().real() - b.a().real()) <= tol &&
           std::abs(a.a().imag() - b.a().imag()) <= tol;
}

}  // namespace

CandidateSet candidate_set(const ExtremaSet& source, const ExtremaSet& target, int angles) {
    if (angles < 1) throw InputError("bad_angle_count", "candidate_set needs K >= 1");

    CandidateSet out;
    std::vector<Complex> ps, qs;
    for (const auto& e : source.extrema) ps.push_back(e.position);
    for (const auto& e : target.extrema) qs.push_back(e.position);
    if (ps.empty() || qs.empty()) {
        out.fallback = true;
        ps.assign(1, Complex(0.0));
        qs.assign(1, Complex(0.0));
    }

    for (Orientation orientation : {Orientation::preserving, Orientation::reversing})
        for (const Complex& p : ps)
            for (const Complex& q : qs)
                for (int k = 0; k < angles; ++k) {
                    const double theta = 2.0 * std::numbers::pi * k / angles;
                    Candidate c{from_point_angle(p, q, theta, orientation), p, q, k};
                    const bool duplicate = std::any_of(out.candidates.begin(), out.candidates.end(),
                                                       [&](const Candidate& o) { return same_parameters(o.map, c.map); });
                    if (!duplicate) out.candidates.push_back(c);
                }
    return out;
}

}  // namespace cpd
