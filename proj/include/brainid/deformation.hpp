#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "brainid/random.hpp"
#include "brainid/volume.hpp"

namespace brainid {

// Ranges for random spatial transforms. Identical across severity levels.
struct DeformationConfig {
    double rotation_max_deg = 15.0;
    double shearing_max = 0.2;
    double scaling_max = 0.2;
    double translation_max_mm = 0.0;
    double svf_scale_min = 0.03; // fraction of the shortest physical extent
    double svf_scale_max = 0.06;
    double svf_sigma_max = 4.0;  // smoothing std upper bound, control voxels
    double control_spacing_mm = 16.0;
    int integration_steps = 7;

    // No affine, no SVF: generate_deformation() yields the identity.
    static DeformationConfig none();
    void validate() const;
};

struct AffineParams {
    std::array<double, 3> rotation_deg{0, 0, 0};
    std::array<double, 3> scaling{1, 1, 1};
    std::array<double, 3> shearing{0, 0, 0};
    std::array<double, 3> translation_mm{0, 0, 0};

    // Homogeneous map in the physical grid frame, acting about `center`:
    // p' = R * H * S * (p - center) + center + t.
    Mat4 matrix(const Vec3& center) const;
    bool is_identity() const;
};

// Stationary velocity field on a coarse control grid (mm displacement per unit time).
struct SVF {
    Geometry target;          // full-resolution grid the field integrates onto
    double control_spacing_mm = 16.0;
    Dims coarse_dims{2, 2, 2};
    std::array<std::vector<double>, 3> coarse; // x-fastest over coarse_dims
    double amplitude_mm = 0.0;
    double smoothing_sigma = 0.0;

    static SVF zero(const Geometry& target, double control_spacing_mm = 16.0);
    // Spatially constant velocity c (mm).
    static SVF constant(const Geometry& target, const Vec3& c, double control_spacing_mm = 16.0);
    SVF negated() const;

    // Trilinear upsampling of the control grid to the target grid: 3 channels in mm.
    VolumeStack upsample() const;
};

// What a field was built from; enables exact inversion.
struct GeneratedProvenance {
    AffineParams affine;
    std::optional<SVF> svf;
    int steps = 7;
};

enum class ProvenanceKind { None, Generated, Inverse };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::None;
    std::optional<GeneratedProvenance> source; // set for Generated and Inverse
};

// Dense displacement (mm, along the grid axes) such that phi(p) = p + u(p) for physical
// grid points p = index * spacing. Backward convention: warped(x) = input(phi(x)).
class DeformationField {
public:
    DeformationField() = default;
    DeformationField(VolumeStack displacement, Provenance provenance = {}, std::uint64_t id = 0);

    static DeformationField identity(const Geometry& g);
    static DeformationField translation(const Geometry& g, const Vec3& t_mm);

    const Geometry& geometry() const { return displacement_.geometry(); }
    const VolumeStack& displacement() const { return displacement_; }
    const Provenance& provenance() const { return provenance_; }
    std::uint64_t id() const { return id_; }

    Vec3 displacement_at(std::size_t idx) const
    {
        return {displacement_[0][idx], displacement_[1][idx], displacement_[2][idx]};
    }
    // phi evaluated at an arbitrary physical point (edge-clamped interpolation).
    Vec3 map(const Vec3& physical_point) const;

private:
    VolumeStack displacement_;
    Provenance provenance_;
    std::uint64_t id_ = 0;
};

AffineParams sample_affine(Rng& rng, const DeformationConfig& cfg);
SVF sample_svf(Rng& rng, const DeformationConfig& cfg, const Geometry& target);

// exp(v) by scaling and squaring: d0 = v / 2^steps, then d <- d o d, `steps` times.
DeformationField integrate_svf(const SVF& svf, int steps = 7);

// phi = T o A: draws A then the SVF behind T from `rng`.
DeformationField generate_deformation(Rng& rng, const DeformationConfig& cfg, const Geometry& g,
                                      std::uint64_t id = 0);
// Rebuilds the dense field T o A from its recorded parameters.
DeformationField realize(const GeneratedProvenance& source, const Geometry& g, std::uint64_t id = 0);

// (outer o inner)(p) = outer(inner(p)).
DeformationField compose(const DeformationField& outer, const DeformationField& inner);
DeformationField compose(const DeformationField& outer, const AffineParams& inner);
DeformationField compose(const Mat4& outer, const DeformationField& inner);

// Generated fields invert exactly as A^-1 o exp(-v); other fields use 20 fixed-point
// iterations and throw NotInvertible if the residual exceeds 1 voxel.
DeformationField invert(const DeformationField& field);
DeformationField invert_fixed_point(const DeformationField& field, int iterations = 20, double step = 1.0);

// Backward warps on the field's grid; input must share dims and spacing with the field.
Volume warp_volume(const Volume& v, const DeformationField& field);
LabelMap warp_labels(const LabelMap& lm, const DeformationField& field);

// General resampling into the field's grid: the field maps field-grid physical points to
// physical points of the source grid. Output carries the field's geometry.
Volume resample_through(const Volume& source, const DeformationField& field);

// |phi(p) - p| in voxels per grid point.
std::vector<double> displacement_norm_voxels(const DeformationField& field);

} // namespace brainid
