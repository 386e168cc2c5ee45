#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "brainid/deformation.hpp"
#include "brainid/random.hpp"
#include "brainid/volume.hpp"

namespace brainid {

// Ordered: None < Mild < Medium < Severe. None switches every corruption stage off.
enum class Level { None = 0, Mild = 1, Medium = 2, Severe = 3 };

std::string_view to_string(Level level);
Level parse_level(std::string_view name); // "none", "mild", "medium", "severe"

struct Range {
    double min = 0.0;
    double max = 0.0;
};

// Full parameter group of one corruption level. Noise std is on the 0-255 scale.
struct SeverityConfig {
    Level level = Level::Mild;
    DeformationConfig deformation;
    double p_low_field = 0.0;
    double p_anisotropic = 0.0;
    Range low_field_spacing_mm{1.5, 4.0};
    Range anisotropic_spacing_mm{2.5, 7.0};
    Range bias_mean;
    Range bias_std;
    int bias_grid = 4; // coarse control points per axis, at most 8
    Range noise_std_255;

    static SeverityConfig preset(Level level);
    static SeverityConfig none();
    void validate() const;

    bool bias_enabled() const { return bias_mean.max != 0.0 || bias_mean.min != 0.0 || bias_std.max > 0.0; }
    bool resolution_enabled() const { return p_low_field > 0.0 || p_anisotropic > 0.0; }
    bool noise_enabled() const { return noise_std_255.max > 0.0; }
};

// Smooth multiplicative field: exp of a trilinearly upsampled coarse log-field.
struct BiasField {
    Dims coarse_dims{4, 4, 4};
    std::vector<double> coarse_log; // x-fastest
    double mean = 0.0;              // drawn mu_b
    double std = 0.0;               // drawn sigma_b
    Volume field;                   // strictly positive
};

enum class ResolutionMode { Unchanged, LowField, Anisotropic };
std::string_view to_string(ResolutionMode mode);
ResolutionMode parse_resolution_mode(std::string_view name);

struct ResolutionRecord {
    ResolutionMode mode = ResolutionMode::Unchanged;
    Spacing spacing{1.0, 1.0, 1.0}; // simulated acquisition spacing, mm
    int axis = -1;                  // slice axis for anisotropic acquisitions
};

struct NoiseRecord {
    double sigma = 0.0; // on the [0, 1] intensity scale
    std::uint64_t seed = 0;
};

struct BiasRecord {
    Dims coarse_dims{4, 4, 4};
    std::vector<double> coarse_log;
    double mean = 0.0;
    double std = 0.0;
};

// Every drawn parameter of one corrupt() call; enough to replay it bit for bit.
struct CorruptionRecord {
    std::uint64_t seed = 0;
    Level level = Level::None;
    std::optional<BiasRecord> bias;
    std::optional<ResolutionRecord> resolution;
    std::optional<NoiseRecord> noise;

    bool empty() const { return !bias && !resolution && !noise; }
};

BiasField sample_bias_field(Rng& rng, const SeverityConfig& cfg, const Geometry& geometry);
Volume bias_from_coarse(const Dims& coarse_dims, const std::vector<double>& coarse_log, const Geometry& geometry);
Volume apply_bias(const Volume& v, const Volume& bias);
inline Volume apply_bias(const Volume& v, const BiasField& b) { return apply_bias(v, b.field); }

// Blur with FWHM = target spacing along each coarsened axis, subsample at the target spacing,
// then linearly upsample back onto the input grid.
Volume resample_to_spacing(const Volume& v, const Spacing& target_mm);
ResolutionRecord draw_resolution(Rng& rng, const SeverityConfig& cfg, const Spacing& current);
std::pair<Volume, ResolutionRecord> simulate_resolution(const Volume& v, Rng& rng, const SeverityConfig& cfg);

double draw_noise_sigma(Rng& rng, const SeverityConfig& cfg);
Volume add_gaussian_noise(const Volume& v, double sigma, std::uint64_t seed); // clamps to [0, 1]
Volume add_noise(const Volume& v, Rng& rng, const SeverityConfig& cfg);

// bias -> resolution -> noise -> min-max renormalization.
std::pair<Volume, CorruptionRecord> corrupt(const Volume& v, Rng& rng, const SeverityConfig& cfg);
Volume replay(const Volume& v, const CorruptionRecord& record);

} // namespace brainid
