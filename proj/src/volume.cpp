#include "brainid/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brainid/error.hpp"
#include "brainid/parallel.hpp"

namespace brainid {

Geometry Geometry::isotropic(Dims dims, double spacing)
{
    Geometry g;
    g.dims = dims;
    g.spacing = {spacing, spacing, spacing};
    g.grid_to_world = Mat4::Identity();
    for (int a = 0; a < 3; ++a)
        g.grid_to_world(a, a) = spacing;
    return g;
}

std::array<int, 3> Geometry::coords(std::size_t idx) const
{
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
}

Vec3 Geometry::extent_mm() const
{
    return {dims[0] * spacing[0], dims[1] * spacing[1], dims[2] * spacing[2]};
}

Vec3 Geometry::center_mm() const
{
    return {0.5 * (dims[0] - 1) * spacing[0], 0.5 * (dims[1] - 1) * spacing[1], 0.5 * (dims[2] - 1) * spacing[2]};
}

void Geometry::validate() const
{
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1)
            throw Error(ErrorCode::InvalidArgument, "dims[" + std::to_string(a) + "] must be positive");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            throw Error(ErrorCode::InvalidArgument, "spacing[" + std::to_string(a) + "] must be positive");
    }
    if (std::abs(grid_to_world.topLeftCorner<3, 3>().determinant()) <= 1e-12)
        throw Error(ErrorCode::InvalidArgument, "grid_to_world is singular");
}

bool same_geometry(const Geometry& a, const Geometry& b)
{
    if (a.dims != b.dims)
        return false;
    for (int i = 0; i < 3; ++i)
        if (std::abs(a.spacing[i] - b.spacing[i]) > 1e-6)
            return false;
    return (a.grid_to_world - b.grid_to_world).cwiseAbs().maxCoeff() <= 1e-5;
}

void require_same_geometry(const Geometry& a, const Geometry& b, const char* context)
{
    if (!same_geometry(a, b))
        throw Error(ErrorCode::GeometryMismatch, context);
}

Volume::Volume(const Geometry& geometry, double fill) : geometry_(geometry)
{
    geometry_.validate();
    data_.assign(geometry_.voxel_count(), fill);
}

Volume::Volume(const Geometry& geometry, std::vector<double> data) : geometry_(geometry), data_(std::move(data))
{
    geometry_.validate();
    if (data_.size() != geometry_.voxel_count())
        throw Error(ErrorCode::InvalidArgument, "volume data length " + std::to_string(data_.size()) +
                                                    " does not match dims (" + std::to_string(geometry_.voxel_count()) + ")");
}

Volume Volume::retagged(const Geometry& geometry) const
{
    if (geometry.dims != geometry_.dims)
        throw Error(ErrorCode::GeometryMismatch, "retag requires identical dims");
    return Volume(geometry, data_);
}

LabelMap::LabelMap(const Geometry& geometry, std::vector<std::int32_t> data)
    : geometry_(geometry), data_(std::move(data))
{
    geometry_.validate();
    if (data_.size() != geometry_.voxel_count())
        throw Error(ErrorCode::InvalidArgument, "label data length does not match dims");
    std::vector<char> seen;
    for (std::int32_t l : data_) {
        if (l < 0)
            throw Error(ErrorCode::InvalidArgument, "negative label " + std::to_string(l));
        if (static_cast<std::size_t>(l) >= seen.size())
            seen.resize(static_cast<std::size_t>(l) + 1, 0);
        seen[static_cast<std::size_t>(l)] = 1;
    }
    for (std::size_t l = 0; l < seen.size(); ++l)
        if (seen[l])
            labels_.push_back(static_cast<std::int32_t>(l));
}

LabelMap LabelMap::retagged(const Geometry& geometry) const
{
    if (geometry.dims != geometry_.dims)
        throw Error(ErrorCode::GeometryMismatch, "retag requires identical dims");
    return LabelMap(geometry, data_);
}

VolumeStack::VolumeStack(std::vector<Volume> channels) : channels_(std::move(channels))
{
    if (channels_.empty())
        throw Error(ErrorCode::InvalidArgument, "volume stack needs at least one channel");
    for (std::size_t c = 1; c < channels_.size(); ++c)
        require_same_geometry(channels_[0].geometry(), channels_[c].geometry(), "stack channels differ in geometry");
}

namespace {

struct Corner {
    int i0, i1;
    double w;
};

// Splits a coordinate on an axis of length n into the two bracketing indices.
inline Corner bracket(double p, int n)
{
    if (n == 1)
        return {0, 0, 0.0};
    int i0 = static_cast<int>(std::floor(p));
    i0 = std::clamp(i0, 0, n - 2);
    return {i0, i0 + 1, p - i0};
}

inline double interpolate(const Volume& v, const Vec3& p)
{
    const auto& d = v.dims();
    const Corner x = bracket(p[0], d[0]);
    const Corner y = bracket(p[1], d[1]);
    const Corner z = bracket(p[2], d[2]);
    const double c00 = v.at(x.i0, y.i0, z.i0) * (1 - x.w) + v.at(x.i1, y.i0, z.i0) * x.w;
    const double c10 = v.at(x.i0, y.i1, z.i0) * (1 - x.w) + v.at(x.i1, y.i1, z.i0) * x.w;
    const double c01 = v.at(x.i0, y.i0, z.i1) * (1 - x.w) + v.at(x.i1, y.i0, z.i1) * x.w;
    const double c11 = v.at(x.i0, y.i1, z.i1) * (1 - x.w) + v.at(x.i1, y.i1, z.i1) * x.w;
    const double c0 = c00 * (1 - y.w) + c10 * y.w;
    const double c1 = c01 * (1 - y.w) + c11 * y.w;
    return c0 * (1 - z.w) + c1 * z.w;
}

} // namespace

double trilinear_sample(const Volume& v, const Vec3& p)
{
    const auto& d = v.dims();
    for (int a = 0; a < 3; ++a)
        if (!(p[a] >= 0.0 && p[a] <= d[a] - 1))
            return 0.0;
    return interpolate(v, p);
}

double trilinear_sample_clamped(const Volume& v, const Vec3& p)
{
    const auto& d = v.dims();
    Vec3 q;
    for (int a = 0; a < 3; ++a)
        q[a] = std::isfinite(p[a]) ? std::clamp(p[a], 0.0, static_cast<double>(d[a] - 1)) : 0.0;
    return interpolate(v, q);
}

std::int32_t nearest_sample(const LabelMap& lm, const Vec3& p)
{
    const auto& d = lm.dims();
    int idx[3];
    for (int a = 0; a < 3; ++a) {
        if (!std::isfinite(p[a]))
            return 0;
        const double r = std::ceil(p[a] - 0.5);
        if (r < 0.0 || r > d[a] - 1)
            return 0;
        idx[a] = static_cast<int>(r);
    }
    return lm.at(idx[0], idx[1], idx[2]);
}

VolumeStack spatial_gradient(const Volume& v)
{
    const Geometry& g = v.geometry();
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] < 2)
            throw Error(ErrorCode::DegenerateGrid, "gradient needs at least 2 voxels along axis " + std::to_string(a));

    std::vector<Volume> out(3, Volume(g));
    const std::size_t stride[3] = {1, static_cast<std::size_t>(g.dims[0]),
                                   static_cast<std::size_t>(g.dims[0]) * g.dims[1]};
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto c = g.coords(idx);
            for (int a = 0; a < 3; ++a) {
                const int n = g.dims[a];
                double diff;
                if (c[a] == 0)
                    diff = v[idx + stride[a]] - v[idx];
                else if (c[a] == n - 1)
                    diff = v[idx] - v[idx - stride[a]];
                else
                    diff = 0.5 * (v[idx + stride[a]] - v[idx - stride[a]]);
                out[a][idx] = diff / g.spacing[a];
            }
        }
    });
    return VolumeStack(std::move(out));
}

Volume minmax_normalize(const Volume& v)
{
    Volume out(v.geometry());
    if (v.size() == 0)
        return out;
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    const double range = *hi - *lo;
    if (!(range > 0.0))
        return out;
    const double min = *lo;
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = (v[i] - min) / range;
    return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma)
{
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& w : k)
        w /= sum;
    return k;
}

Volume blur_axis(const Volume& v, int axis, double sigma)
{
    const Geometry& g = v.geometry();
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    const int n = g.dims[axis];
    Volume out(g);
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            auto c = g.coords(idx);
            const int centre = c[axis];
            double acc = 0.0;
            for (int o = -radius; o <= radius; ++o) {
                c[axis] = std::clamp(centre + o, 0, n - 1);
                acc += kernel[o + radius] * v.at(c[0], c[1], c[2]);
            }
            out[idx] = acc;
        }
    });
    return out;
}

} // namespace

Volume gaussian_blur(const Volume& v, const std::array<double, 3>& sigma_voxels)
{
    Volume out = v;
    for (int a = 0; a < 3; ++a)
        if (sigma_voxels[a] > 0.0)
            out = blur_axis(out, a, sigma_voxels[a]);
    return out;
}

std::vector<std::uint8_t> eroded_foreground(const LabelMap& lm, int radius)
{
    const Geometry& g = lm.geometry();
    std::vector<std::uint8_t> mask(lm.size());
    for (std::size_t i = 0; i < lm.size(); ++i)
        mask[i] = lm[i] != 0 ? 1 : 0;
    for (int r = 0; r < radius; ++r) {
        std::vector<std::uint8_t> next(mask.size(), 0);
        for (std::size_t idx = 0; idx < mask.size(); ++idx) {
            if (!mask[idx])
                continue;
            const auto c = g.coords(idx);
            bool keep = true;
            for (int a = 0; a < 3 && keep; ++a) {
                for (int s : {-1, 1}) {
                    auto n = c;
                    n[a] += s;
                    if (n[a] < 0 || n[a] >= g.dims[a] || !mask[g.index(n[0], n[1], n[2])]) {
                        keep = false;
                        break;
                    }
                }
            }
            next[idx] = keep ? 1 : 0;
        }
        mask.swap(next);
    }
    return mask;
}

} // namespace brainid
