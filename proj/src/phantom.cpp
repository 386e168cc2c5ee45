#include "brainid/phantom.hpp"

#include <cmath>
#include <numbers>

#include "brainid/random.hpp"

namespace brainid {

namespace {

double ellipsoid_radius(const Vec3& d, const Vec3& r)
{
    return std::sqrt((d[0] / r[0]) * (d[0] / r[0]) + (d[1] / r[1]) * (d[1] / r[1]) + (d[2] / r[2]) * (d[2] / r[2]));
}

} // namespace

SubjectRecord make_phantom(std::uint64_t seed, Dims dims, double spacing_mm, std::string id)
{
    using namespace phantom_labels;
    Rng rng(derive_seed(seed, "phantom"));
    const Geometry g = Geometry::isotropic(dims, spacing_mm);
    const Vec3 centre = g.center_mm();
    const Vec3 extent = g.extent_mm();

    Vec3 head(0.36 * extent[0], 0.42 * extent[1], 0.34 * extent[2]);
    for (int a = 0; a < 3; ++a)
        head[a] *= uniform(rng, 0.94, 1.06);
    const double brain = uniform(rng, 0.87, 0.91);
    const double white = uniform(rng, 0.68, 0.74);
    const double fold_amp = uniform(rng, 0.05, 0.09);
    const int fold_u = 4 + static_cast<int>(uniform(rng, 0.0, 3.0));
    const int fold_v = 3 + static_cast<int>(uniform(rng, 0.0, 3.0));
    const double phase_u = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double phase_v = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double deep_offset = uniform(rng, 0.22, 0.28) * head[0];
    const Vec3 deep_r(0.17 * head[0], 0.20 * head[1], 0.20 * head[2]);
    const Vec3 vent_r(0.07 * head[0], 0.30 * head[1], 0.12 * head[2]);
    const double vent_offset = 0.09 * head[0];

    std::vector<std::int32_t> labels(g.voxel_count(), 0);
    for (std::size_t idx = 0; idx < labels.size(); ++idx) {
        const auto c = g.coords(idx);
        const Vec3 d = g.physical(Vec3(c[0], c[1], c[2])) - centre;
        const double rho = ellipsoid_radius(d, head);
        if (rho > 1.0)
            continue;
        const double theta = std::atan2(d[1], d[0]);
        const double phi = std::atan2(d[2], std::hypot(d[0], d[1]));
        const double fold = 1.0 + fold_amp * std::sin(fold_u * theta + phase_u) * std::cos(fold_v * phi + phase_v);

        std::int32_t l = kCsf;
        if (rho <= brain)
            l = rho <= white * fold ? kWhiteMatter : kCortex;
        if (ellipsoid_radius(d - Vec3(-deep_offset, 0, 0), deep_r) <= 1.0)
            l = kDeepLeft;
        if (ellipsoid_radius(d - Vec3(deep_offset, 0, 0), deep_r) <= 1.0)
            l = kDeepRight;
        if (ellipsoid_radius(d - Vec3(-vent_offset, 0, 0.05 * head[2]), vent_r) <= 1.0 ||
            ellipsoid_radius(d - Vec3(vent_offset, 0, 0.05 * head[2]), vent_r) <= 1.0)
            l = kVentricle;
        labels[idx] = l;
    }

    static constexpr double t1[] = {0.0, 0.15, 0.55, 0.85, 0.66, 0.62, 0.08};
    Volume mprage(g);
    for (std::size_t idx = 0; idx < labels.size(); ++idx)
        mprage[idx] = t1[labels[idx]];
    mprage = gaussian_blur(mprage, {0.6, 0.6, 0.6});

    SubjectRecord subject;
    subject.id = id.empty() ? "phantom-" + std::to_string(seed) : std::move(id);
    subject.labels = LabelMap(g, std::move(labels));
    subject.mprage = std::move(mprage);
    return subject;
}

} // namespace brainid
