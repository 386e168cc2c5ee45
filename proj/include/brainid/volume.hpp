#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace brainid {

using Vec3 = Eigen::Vector3d;
using Mat4 = Eigen::Matrix4d;
using Dims = std::array<int, 3>;
using Spacing = std::array<double, 3>;

// Grid layout shared by every dense volume: dims, voxel spacing (mm) and grid-to-world affine.
struct Geometry {
    Dims dims{1, 1, 1};
    Spacing spacing{1.0, 1.0, 1.0};
    Mat4 grid_to_world = Mat4::Identity();

    static Geometry isotropic(Dims dims, double spacing = 1.0);

    std::size_t voxel_count() const
    {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    std::array<int, 3> coords(std::size_t idx) const;

    // Physical position (mm) of a voxel along the grid axes; the frame all deformations live in.
    Vec3 physical(const Vec3& voxel) const { return {voxel[0] * spacing[0], voxel[1] * spacing[1], voxel[2] * spacing[2]}; }
    Vec3 to_voxel(const Vec3& phys) const { return {phys[0] / spacing[0], phys[1] / spacing[1], phys[2] / spacing[2]}; }
    Vec3 extent_mm() const;
    Vec3 center_mm() const;

    // Throws InvalidArgument on non-positive dims/spacing or a singular affine.
    void validate() const;
};

// dims equal, spacing within 1e-6, affine within 1e-5.
bool same_geometry(const Geometry& a, const Geometry& b);
void require_same_geometry(const Geometry& a, const Geometry& b, const char* context);

class Volume {
public:
    Volume() = default;
    explicit Volume(const Geometry& geometry, double fill = 0.0);
    Volume(const Geometry& geometry, std::vector<double> data);

    const Geometry& geometry() const { return geometry_; }
    const Dims& dims() const { return geometry_.dims; }
    std::size_t size() const { return data_.size(); }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    double operator[](std::size_t idx) const { return data_[idx]; }
    double& operator[](std::size_t idx) { return data_[idx]; }
    double at(int i, int j, int k) const { return data_[geometry_.index(i, j, k)]; }
    double& at(int i, int j, int k) { return data_[geometry_.index(i, j, k)]; }

    // Same data, different geometry tag. Dims must agree.
    Volume retagged(const Geometry& geometry) const;

private:
    Geometry geometry_;
    std::vector<double> data_;
};

// Non-negative integer labels; label 0 is background. Immutable once built.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(const Geometry& geometry, std::vector<std::int32_t> data);

    const Geometry& geometry() const { return geometry_; }
    const Dims& dims() const { return geometry_.dims; }
    std::size_t size() const { return data_.size(); }

    std::span<const std::int32_t> data() const { return data_; }
    std::int32_t operator[](std::size_t idx) const { return data_[idx]; }
    std::int32_t at(int i, int j, int k) const { return data_[geometry_.index(i, j, k)]; }

    // Sorted unique labels present, including 0 if any background voxel exists.
    const std::vector<std::int32_t>& label_set() const { return labels_; }

    LabelMap retagged(const Geometry& geometry) const;

private:
    Geometry geometry_;
    std::vector<std::int32_t> data_;
    std::vector<std::int32_t> labels_;
};

class VolumeStack {
public:
    VolumeStack() = default;
    explicit VolumeStack(std::vector<Volume> channels);

    std::size_t channel_count() const { return channels_.size(); }
    const Geometry& geometry() const { return channels_.front().geometry(); }
    const Volume& operator[](std::size_t c) const { return channels_[c]; }
    Volume& operator[](std::size_t c) { return channels_[c]; }
    const std::vector<Volume>& channels() const { return channels_; }

private:
    std::vector<Volume> channels_;
};

// Trilinear interpolation at a continuous voxel coordinate. Points outside [0, n-1]^3 give 0.
double trilinear_sample(const Volume& v, const Vec3& p);

// Same, but coordinates are clamped into the grid first (replicate border). Used for
// displacement fields.
double trilinear_sample_clamped(const Volume& v, const Vec3& p);

// Nearest voxel label, ties toward the lower index; 0 when the nearest index is off-grid.
std::int32_t nearest_sample(const LabelMap& lm, const Vec3& p);

// Central differences inside, one-sided at the faces, divided by spacing (intensity/mm).
VolumeStack spatial_gradient(const Volume& v);

// Affine rescale to [0, 1]; a constant volume maps to zeros.
Volume minmax_normalize(const Volume& v);

// Separable Gaussian blur with per-axis std in voxels (0 skips the axis), replicate border.
Volume gaussian_blur(const Volume& v, const std::array<double, 3>& sigma_voxels);

// Binary mask of label != 0, eroded by `radius` voxels with a 6-connected structuring element.
std::vector<std::uint8_t> eroded_foreground(const LabelMap& lm, int radius);

} // namespace brainid
