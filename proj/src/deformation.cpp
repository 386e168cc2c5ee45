#include "brainid/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "brainid/error.hpp"
#include "brainid/parallel.hpp"

namespace brainid {

DeformationConfig DeformationConfig::none()
{
    DeformationConfig cfg;
    cfg.rotation_max_deg = 0;
    cfg.shearing_max = 0;
    cfg.scaling_max = 0;
    cfg.translation_max_mm = 0;
    cfg.svf_scale_min = 0;
    cfg.svf_scale_max = 0;
    return cfg;
}

void DeformationConfig::validate() const
{
    auto non_negative = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be a finite non-negative value");
    };
    non_negative(rotation_max_deg, "rotation_max");
    non_negative(shearing_max, "shearing_max");
    non_negative(scaling_max, "scaling_max");
    non_negative(translation_max_mm, "translation_max");
    non_negative(svf_scale_min, "svf_scale_min");
    non_negative(svf_scale_max, "svf_scale_max");
    non_negative(svf_sigma_max, "svf_sigma_max");
    if (scaling_max >= 1.0)
        throw Error(ErrorCode::InvalidArgument, "scaling_max must be below 1");
    if (svf_scale_min > svf_scale_max)
        throw Error(ErrorCode::InvalidArgument, "svf_scale_min exceeds svf_scale_max");
    if (!(control_spacing_mm > 0.0))
        throw Error(ErrorCode::InvalidArgument, "control_spacing must be positive");
    if (integration_steps < 1)
        throw Error(ErrorCode::InvalidArgument, "integration steps must be >= 1");
}

Mat4 AffineParams::matrix(const Vec3& center) const
{
    using Eigen::AngleAxisd;
    const double deg = std::numbers::pi / 180.0;
    const Eigen::Matrix3d rot = (AngleAxisd(rotation_deg[2] * deg, Vec3::UnitZ()) *
                                 AngleAxisd(rotation_deg[1] * deg, Vec3::UnitY()) *
                                 AngleAxisd(rotation_deg[0] * deg, Vec3::UnitX()))
                                    .toRotationMatrix();
    Eigen::Matrix3d shear = Eigen::Matrix3d::Identity();
    shear(0, 1) = shearing[0];
    shear(0, 2) = shearing[1];
    shear(1, 2) = shearing[2];
    const Eigen::Matrix3d scale = Vec3(scaling[0], scaling[1], scaling[2]).asDiagonal();
    const Eigen::Matrix3d linear = rot * shear * scale;

    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = linear;
    m.topRightCorner<3, 1>() = center - linear * center + Vec3(translation_mm[0], translation_mm[1], translation_mm[2]);
    return m;
}

bool AffineParams::is_identity() const
{
    for (int a = 0; a < 3; ++a)
        if (rotation_deg[a] != 0 || scaling[a] != 1 || shearing[a] != 0 || translation_mm[a] != 0)
            return false;
    return true;
}

SVF SVF::zero(const Geometry& target, double control_spacing_mm)
{
    target.validate();
    for (int a = 0; a < 3; ++a)
        if (!(control_spacing_mm > target.spacing[a]))
            throw Error(ErrorCode::InvalidArgument, "SVF control spacing must exceed the voxel spacing");
    SVF svf;
    svf.target = target;
    svf.control_spacing_mm = control_spacing_mm;
    for (int a = 0; a < 3; ++a) {
        const double extent = (target.dims[a] - 1) * target.spacing[a];
        svf.coarse_dims[a] = std::max(2, static_cast<int>(std::ceil(extent / control_spacing_mm)) + 1);
    }
    const std::size_t n = static_cast<std::size_t>(svf.coarse_dims[0]) * svf.coarse_dims[1] * svf.coarse_dims[2];
    for (auto& ch : svf.coarse)
        ch.assign(n, 0.0);
    return svf;
}

SVF SVF::constant(const Geometry& target, const Vec3& c, double control_spacing_mm)
{
    SVF svf = zero(target, control_spacing_mm);
    for (int a = 0; a < 3; ++a)
        std::fill(svf.coarse[a].begin(), svf.coarse[a].end(), c[a]);
    return svf;
}

SVF SVF::negated() const
{
    SVF out = *this;
    for (auto& ch : out.coarse)
        for (auto& v : ch)
            v = -v;
    return out;
}

VolumeStack SVF::upsample() const
{
    const Geometry coarse_geom = Geometry::isotropic(coarse_dims, control_spacing_mm);
    std::vector<Volume> coarse_vols;
    for (int a = 0; a < 3; ++a)
        coarse_vols.emplace_back(coarse_geom, coarse[a]);

    std::vector<Volume> out(3, Volume(target));
    parallel_for(target.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto c = target.coords(idx);
            const Vec3 p = target.physical(Vec3(c[0], c[1], c[2])) / control_spacing_mm;
            for (int a = 0; a < 3; ++a)
                out[a][idx] = trilinear_sample_clamped(coarse_vols[a], p);
        }
    });
    return VolumeStack(std::move(out));
}

DeformationField::DeformationField(VolumeStack displacement, Provenance provenance, std::uint64_t id)
    : displacement_(std::move(displacement)), provenance_(std::move(provenance)), id_(id)
{
    if (displacement_.channel_count() != 3)
        throw Error(ErrorCode::ChannelMismatch, "deformation fields need exactly 3 displacement channels, got " +
                                                    std::to_string(displacement_.channel_count()));
    for (const auto& ch : displacement_.channels())
        for (double v : ch.data())
            if (!std::isfinite(v))
                throw Error(ErrorCode::NonFiniteField, "displacement contains non-finite values");
}

DeformationField DeformationField::identity(const Geometry& g)
{
    GeneratedProvenance src;
    src.steps = 0;
    return DeformationField(VolumeStack(std::vector<Volume>(3, Volume(g))), {ProvenanceKind::Generated, src});
}

DeformationField DeformationField::translation(const Geometry& g, const Vec3& t_mm)
{
    GeneratedProvenance src;
    src.affine.translation_mm = {t_mm[0], t_mm[1], t_mm[2]};
    src.steps = 0;
    return realize(src, g);
}

Vec3 DeformationField::map(const Vec3& p) const
{
    const Vec3 vox = geometry().to_voxel(p);
    return p + Vec3(trilinear_sample_clamped(displacement_[0], vox), trilinear_sample_clamped(displacement_[1], vox),
                    trilinear_sample_clamped(displacement_[2], vox));
}

AffineParams sample_affine(Rng& rng, const DeformationConfig& cfg)
{
    cfg.validate();
    AffineParams a;
    for (auto& r : a.rotation_deg)
        r = uniform(rng, -cfg.rotation_max_deg, cfg.rotation_max_deg);
    for (auto& s : a.scaling)
        s = uniform(rng, 1.0 - cfg.scaling_max, 1.0 + cfg.scaling_max);
    for (auto& h : a.shearing)
        h = uniform(rng, -cfg.shearing_max, cfg.shearing_max);
    for (auto& t : a.translation_mm)
        t = uniform(rng, -cfg.translation_max_mm, cfg.translation_max_mm);
    return a;
}

namespace {

// In-place separable Gaussian smoothing of a small grid, replicate border.
void smooth_coarse(std::vector<double>& values, const Dims& dims, double sigma)
{
    if (!(sigma > 0.0))
        return;
    const Geometry g = Geometry::isotropic(dims);
    Volume v(g, values);
    v = gaussian_blur(v, {sigma, sigma, sigma});
    values.assign(v.data().begin(), v.data().end());
}

} // namespace

SVF sample_svf(Rng& rng, const DeformationConfig& cfg, const Geometry& target)
{
    cfg.validate();
    SVF svf = SVF::zero(target, cfg.control_spacing_mm);
    const Vec3 extent = target.extent_mm();
    const double shortest = extent.minCoeff();
    svf.amplitude_mm = uniform(rng, cfg.svf_scale_min, cfg.svf_scale_max) * shortest;
    svf.smoothing_sigma = cfg.svf_sigma_max >= 1.0 ? uniform(rng, 1.0, cfg.svf_sigma_max) : cfg.svf_sigma_max;

    for (auto& ch : svf.coarse)
        for (auto& v : ch)
            v = standard_normal(rng);
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (auto& ch : svf.coarse) {
        smooth_coarse(ch, svf.coarse_dims, svf.smoothing_sigma);
        for (double v : ch)
            sum_sq += v * v;
        count += ch.size();
    }
    const double rms = std::sqrt(sum_sq / static_cast<double>(count));
    const double gain = rms > 0.0 ? svf.amplitude_mm / rms : 0.0;
    for (auto& ch : svf.coarse)
        for (auto& v : ch)
            v *= gain;
    return svf;
}

namespace {

void require_finite(const VolumeStack& s, const char* what)
{
    for (const auto& ch : s.channels())
        for (double v : ch.data())
            if (!std::isfinite(v))
                throw Error(ErrorCode::NonFiniteField, what);
}

// Pointwise map: out(p) = f(p) for every grid point, f returning a physical point.
template <typename F>
VolumeStack displacement_from_map(const Geometry& g, F&& f)
{
    std::vector<Volume> out(3, Volume(g));
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto c = g.coords(idx);
            const Vec3 p = g.physical(Vec3(c[0], c[1], c[2]));
            const Vec3 q = f(idx, p);
            for (int a = 0; a < 3; ++a)
                out[a][idx] = q[a] - p[a];
        }
    });
    return VolumeStack(std::move(out));
}

Vec3 apply(const Mat4& m, const Vec3& p) { return m.topLeftCorner<3, 3>() * p + m.topRightCorner<3, 1>(); }

} // namespace

DeformationField integrate_svf(const SVF& svf, int steps)
{
    if (steps < 1)
        throw Error(ErrorCode::InvalidArgument, "integration needs at least one squaring step");
    for (const auto& ch : svf.coarse)
        for (double v : ch)
            if (!std::isfinite(v))
                throw Error(ErrorCode::NonFiniteField, "velocity field contains non-finite values");

    const Geometry& g = svf.target;
    VolumeStack disp = svf.upsample();
    const double scale = std::ldexp(1.0, -steps);
    for (std::size_t a = 0; a < 3; ++a)
        for (auto& v : disp[a].data())
            v *= scale;

    for (int s = 0; s < steps; ++s) {
        const DeformationField current(disp);
        disp = displacement_from_map(g, [&](std::size_t idx, const Vec3& p) {
            const Vec3 half = p + current.displacement_at(idx);
            return current.map(half);
        });
    }
    require_finite(disp, "scaling and squaring diverged");

    GeneratedProvenance src;
    src.svf = svf;
    src.steps = steps;
    return DeformationField(std::move(disp), {ProvenanceKind::Generated, src});
}

DeformationField realize(const GeneratedProvenance& source, const Geometry& g, std::uint64_t id)
{
    const Mat4 affine = source.affine.matrix(g.center_mm());
    VolumeStack disp = [&] {
        if (!source.svf)
            return displacement_from_map(g, [&](std::size_t, const Vec3& p) { return apply(affine, p); });
        require_same_geometry(source.svf->target, g, "SVF target grid differs from the field grid");
        const DeformationField nonlinear = integrate_svf(*source.svf, source.steps);
        return displacement_from_map(g, [&](std::size_t, const Vec3& p) { return nonlinear.map(apply(affine, p)); });
    }();
    return DeformationField(std::move(disp), {ProvenanceKind::Generated, source}, id);
}

DeformationField generate_deformation(Rng& rng, const DeformationConfig& cfg, const Geometry& g, std::uint64_t id)
{
    GeneratedProvenance src;
    src.affine = sample_affine(rng, cfg);
    src.svf = sample_svf(rng, cfg, g);
    src.steps = cfg.integration_steps;
    return realize(src, g, id);
}

DeformationField compose(const DeformationField& outer, const DeformationField& inner)
{
    require_same_geometry(outer.geometry(), inner.geometry(), "compose: fields live on different grids");
    const Geometry& g = inner.geometry();
    return DeformationField(displacement_from_map(g, [&](std::size_t idx, const Vec3& p) {
        return outer.map(p + inner.displacement_at(idx));
    }));
}

DeformationField compose(const DeformationField& outer, const AffineParams& inner)
{
    const Geometry& g = outer.geometry();
    const Mat4 m = inner.matrix(g.center_mm());
    return DeformationField(
        displacement_from_map(g, [&](std::size_t, const Vec3& p) { return outer.map(apply(m, p)); }));
}

DeformationField compose(const Mat4& outer, const DeformationField& inner)
{
    const Geometry& g = inner.geometry();
    return DeformationField(displacement_from_map(
        g, [&](std::size_t idx, const Vec3& p) { return apply(outer, p + inner.displacement_at(idx)); }));
}

DeformationField invert_fixed_point(const DeformationField& field, int iterations, double step)
{
    const Geometry& g = field.geometry();
    std::vector<Volume> w(3, Volume(g));
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t i = 0; i < g.voxel_count(); ++i)
            w[a][i] = -field.displacement()[a][i];

    // Solve w(p) = -u(p + w(p)) independently per grid point.
    double worst = 0.0;
    std::vector<double> residual(g.voxel_count(), 0.0);
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto c = g.coords(idx);
            const Vec3 p = g.physical(Vec3(c[0], c[1], c[2]));
            Vec3 cur(w[0][idx], w[1][idx], w[2][idx]);
            for (int it = 0; it < iterations; ++it) {
                const Vec3 target = -(field.map(p + cur) - (p + cur));
                cur += step * (target - cur);
            }
            const Vec3 r = field.map(p + cur) - p;
            residual[idx] = g.to_voxel(r).norm();
            for (int a = 0; a < 3; ++a)
                w[a][idx] = cur[a];
        }
    });
    worst = *std::max_element(residual.begin(), residual.end());
    if (worst > 1.0)
        throw Error(ErrorCode::NotInvertible,
                    "fixed-point inverse residual " + std::to_string(worst) + " voxel exceeds 1 voxel");
    return DeformationField(VolumeStack(std::move(w)));
}

DeformationField invert(const DeformationField& field)
{
    const Provenance& prov = field.provenance();
    const Geometry& g = field.geometry();
    if (prov.kind == ProvenanceKind::Inverse)
        return realize(*prov.source, g, field.id());
    if (prov.kind == ProvenanceKind::None)
        return invert_fixed_point(field);

    const GeneratedProvenance& src = *prov.source;
    const Mat4 affine_inv = src.affine.matrix(g.center_mm()).inverse();
    VolumeStack disp = [&] {
        if (!src.svf)
            return displacement_from_map(g, [&](std::size_t, const Vec3& p) { return apply(affine_inv, p); });
        const DeformationField t_inv = integrate_svf(src.svf->negated(), src.steps);
        return displacement_from_map(
            g, [&](std::size_t idx, const Vec3& p) { return apply(affine_inv, p + t_inv.displacement_at(idx)); });
    }();
    return DeformationField(std::move(disp), {ProvenanceKind::Inverse, src}, field.id());
}

namespace {

void require_warp_compatible(const Geometry& input, const Geometry& field)
{
    bool ok = input.dims == field.dims;
    for (int a = 0; a < 3 && ok; ++a)
        ok = std::abs(input.spacing[a] - field.spacing[a]) <= 1e-6;
    if (!ok)
        throw Error(ErrorCode::GeometryMismatch, "warp: input grid and deformation grid differ");
}

} // namespace

Volume resample_through(const Volume& source, const DeformationField& field)
{
    const Geometry& g = field.geometry();
    const Geometry& src = source.geometry();
    Volume out(g);
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto c = g.coords(idx);
            const Vec3 q = g.physical(Vec3(c[0], c[1], c[2])) + field.displacement_at(idx);
            out[idx] = trilinear_sample(source, src.to_voxel(q));
        }
    });
    return out;
}

Volume warp_volume(const Volume& v, const DeformationField& field)
{
    require_warp_compatible(v.geometry(), field.geometry());
    return resample_through(v, field).retagged(v.geometry());
}

LabelMap warp_labels(const LabelMap& lm, const DeformationField& field)
{
    require_warp_compatible(lm.geometry(), field.geometry());
    const Geometry& g = lm.geometry();
    std::vector<std::int32_t> out(g.voxel_count());
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto c = g.coords(idx);
            const Vec3 q = g.physical(Vec3(c[0], c[1], c[2])) + field.displacement_at(idx);
            out[idx] = nearest_sample(lm, g.to_voxel(q));
        }
    });
    return LabelMap(g, std::move(out));
}

std::vector<double> displacement_norm_voxels(const DeformationField& field)
{
    const Geometry& g = field.geometry();
    std::vector<double> out(g.voxel_count());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = g.to_voxel(field.displacement_at(i)).norm();
    return out;
}

} // namespace brainid
