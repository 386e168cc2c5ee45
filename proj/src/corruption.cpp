#include "brainid/corruption.hpp"

#include <algorithm>
#include <cmath>

#include "brainid/error.hpp"
#include "brainid/parallel.hpp"

namespace brainid {

std::string_view to_string(Level level)
{
    switch (level) {
    case Level::None: return "none";
    case Level::Mild: return "mild";
    case Level::Medium: return "medium";
    case Level::Severe: return "severe";
    }
    return "none";
}

Level parse_level(std::string_view name)
{
    if (name == "none")
        return Level::None;
    if (name == "mild")
        return Level::Mild;
    if (name == "medium")
        return Level::Medium;
    if (name == "severe")
        return Level::Severe;
    throw Error(ErrorCode::InvalidArgument, "unknown severity level '" + std::string(name) + "'");
}

std::string_view to_string(ResolutionMode mode)
{
    switch (mode) {
    case ResolutionMode::Unchanged: return "unchanged";
    case ResolutionMode::LowField: return "low_field";
    case ResolutionMode::Anisotropic: return "anisotropic";
    }
    return "unchanged";
}

ResolutionMode parse_resolution_mode(std::string_view name)
{
    if (name == "unchanged")
        return ResolutionMode::Unchanged;
    if (name == "low_field")
        return ResolutionMode::LowField;
    if (name == "anisotropic")
        return ResolutionMode::Anisotropic;
    throw Error(ErrorCode::InvalidArgument, "unknown resolution mode '" + std::string(name) + "'");
}

SeverityConfig SeverityConfig::preset(Level level)
{
    SeverityConfig cfg;
    cfg.level = level;
    switch (level) {
    case Level::None:
        return none();
    case Level::Mild:
        cfg.p_low_field = 0.1;
        cfg.p_anisotropic = 0.0;
        cfg.bias_mean = {0.01, 0.02};
        cfg.bias_std = {0.01, 0.05};
        cfg.noise_std_255 = {0.01, 1.0};
        break;
    case Level::Medium:
        cfg.p_low_field = 0.3;
        cfg.p_anisotropic = 0.1;
        cfg.bias_mean = {0.02, 0.03};
        cfg.bias_std = {0.05, 0.3};
        cfg.noise_std_255 = {0.5, 5.0};
        break;
    case Level::Severe:
        cfg.p_low_field = 0.5;
        cfg.p_anisotropic = 0.25;
        cfg.bias_mean = {0.02, 0.04};
        cfg.bias_std = {0.1, 0.6};
        cfg.noise_std_255 = {5.0, 15.0};
        break;
    }
    return cfg;
}

SeverityConfig SeverityConfig::none()
{
    SeverityConfig cfg;
    cfg.level = Level::None;
    return cfg;
}

void SeverityConfig::validate() const
{
    deformation.validate();
    auto probability = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0))
            throw Error(ErrorCode::InvalidArgument, std::string(name) + " must lie in [0, 1]");
    };
    probability(p_low_field, "p_low_field");
    probability(p_anisotropic, "p_anisotropic");
    if (p_low_field + p_anisotropic > 1.0 + 1e-12)
        throw Error(ErrorCode::InvalidArgument, "p_low_field + p_anisotropic exceeds 1");
    auto ordered = [](const Range& r, const char* name) {
        if (!(r.min <= r.max) || !std::isfinite(r.min) || !std::isfinite(r.max))
            throw Error(ErrorCode::InvalidArgument, std::string(name) + " range has min > max");
    };
    ordered(low_field_spacing_mm, "low_field_spacing");
    ordered(anisotropic_spacing_mm, "anisotropic_spacing");
    ordered(bias_mean, "bias_mean");
    ordered(bias_std, "bias_std");
    ordered(noise_std_255, "noise_std");
    if (bias_std.min < 0.0 || noise_std_255.min < 0.0)
        throw Error(ErrorCode::InvalidArgument, "standard deviations must be non-negative");
    if (bias_grid < 2 || bias_grid > 8)
        throw Error(ErrorCode::InvalidArgument, "bias_grid must be between 2 and 8");
}

Volume bias_from_coarse(const Dims& coarse_dims, const std::vector<double>& coarse_log, const Geometry& geometry)
{
    const Geometry coarse_geom = Geometry::isotropic(coarse_dims);
    const Volume coarse(coarse_geom, coarse_log);
    Volume out(geometry);
    parallel_for(geometry.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto c = geometry.coords(idx);
            Vec3 p;
            for (int a = 0; a < 3; ++a)
                p[a] = geometry.dims[a] > 1 ? c[a] * double(coarse_dims[a] - 1) / (geometry.dims[a] - 1) : 0.0;
            out[idx] = std::exp(trilinear_sample_clamped(coarse, p));
        }
    });
    return out;
}

BiasField sample_bias_field(Rng& rng, const SeverityConfig& cfg, const Geometry& geometry)
{
    cfg.validate();
    BiasField b;
    b.coarse_dims = {cfg.bias_grid, cfg.bias_grid, cfg.bias_grid};
    b.mean = uniform(rng, cfg.bias_mean.min, cfg.bias_mean.max);
    b.std = uniform(rng, cfg.bias_std.min, cfg.bias_std.max);
    const std::size_t n = static_cast<std::size_t>(cfg.bias_grid) * cfg.bias_grid * cfg.bias_grid;
    b.coarse_log.resize(n);
    for (auto& v : b.coarse_log)
        v = b.mean + b.std * standard_normal(rng);
    b.field = bias_from_coarse(b.coarse_dims, b.coarse_log, geometry);
    return b;
}

Volume apply_bias(const Volume& v, const Volume& bias)
{
    require_same_geometry(v.geometry(), bias.geometry(), "apply_bias: bias field grid differs from the image");
    Volume out(v.geometry());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = v[i] * bias[i];
    return out;
}

namespace {

// Down- then up-samples one axis by `ratio` (> 1) with linear interpolation.
Volume down_up_axis(const Volume& v, int axis, double ratio)
{
    const Geometry& g = v.geometry();
    const int n = g.dims[axis];
    const int m = static_cast<int>(std::floor((n - 1) / ratio + 1e-9)) + 1;

    auto line_value = [&](std::array<int, 3> c, double pos) {
        const int lo = std::clamp(static_cast<int>(std::floor(pos)), 0, n - 1);
        const int hi = std::min(lo + 1, n - 1);
        const double w = pos - lo;
        c[axis] = lo;
        const double a = v.at(c[0], c[1], c[2]);
        c[axis] = hi;
        const double b = v.at(c[0], c[1], c[2]);
        return a * (1.0 - w) + b * w;
    };

    Volume out(g);
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto c = g.coords(idx);
            // Position on the coarse grid, clamped to its last sample.
            const double coarse_pos = std::min(c[axis] / ratio, static_cast<double>(m - 1));
            const int j0 = static_cast<int>(std::floor(coarse_pos));
            const int j1 = std::min(j0 + 1, m - 1);
            const double w = coarse_pos - j0;
            const double s0 = line_value(c, j0 * ratio);
            const double s1 = line_value(c, j1 * ratio);
            out[idx] = s0 * (1.0 - w) + s1 * w;
        }
    });
    return out;
}

} // namespace

Volume resample_to_spacing(const Volume& v, const Spacing& target_mm)
{
    Volume out = v;
    for (int a = 0; a < 3; ++a) {
        const double ratio = target_mm[a] / v.geometry().spacing[a];
        if (ratio <= 1.0 + 1e-9 || v.dims()[a] < 2)
            continue;
        std::array<double, 3> sigma{0.0, 0.0, 0.0};
        sigma[a] = ratio / 2.355; // FWHM equals the target spacing
        out = gaussian_blur(out, sigma);
        out = down_up_axis(out, a, ratio);
    }
    return out;
}

ResolutionRecord draw_resolution(Rng& rng, const SeverityConfig& cfg, const Spacing& current)
{
    ResolutionRecord rec;
    rec.spacing = current;
    // Every draw happens regardless of the branch taken, so the stream length is fixed.
    const double u = uniform(rng, 0.0, 1.0);
    const double low = uniform(rng, cfg.low_field_spacing_mm.min, cfg.low_field_spacing_mm.max);
    const double slice = uniform(rng, cfg.anisotropic_spacing_mm.min, cfg.anisotropic_spacing_mm.max);
    const int axis = static_cast<int>(std::min(2.0, std::floor(uniform(rng, 0.0, 3.0))));

    if (u < cfg.p_low_field) {
        rec.mode = ResolutionMode::LowField;
        rec.spacing = {low, low, low};
    } else if (u < cfg.p_low_field + cfg.p_anisotropic) {
        rec.mode = ResolutionMode::Anisotropic;
        rec.axis = axis;
        rec.spacing[static_cast<std::size_t>(axis)] = slice;
    }
    return rec;
}

std::pair<Volume, ResolutionRecord> simulate_resolution(const Volume& v, Rng& rng, const SeverityConfig& cfg)
{
    const ResolutionRecord rec = draw_resolution(rng, cfg, v.geometry().spacing);
    if (rec.mode == ResolutionMode::Unchanged)
        return {v, rec};
    return {resample_to_spacing(v, rec.spacing), rec};
}

double draw_noise_sigma(Rng& rng, const SeverityConfig& cfg)
{
    return uniform(rng, cfg.noise_std_255.min, cfg.noise_std_255.max) / 255.0;
}

Volume add_gaussian_noise(const Volume& v, double sigma, std::uint64_t seed)
{
    Volume out(v.geometry());
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = std::clamp(v[i] + sigma * normal(rng), 0.0, 1.0);
    return out;
}

Volume add_noise(const Volume& v, Rng& rng, const SeverityConfig& cfg)
{
    const double sigma = draw_noise_sigma(rng, cfg);
    const std::uint64_t seed = rng();
    if (!(sigma > 0.0))
        return v;
    return add_gaussian_noise(v, sigma, seed);
}

namespace {

Volume run_stages(const Volume& v, const CorruptionRecord& rec)
{
    Volume out = v;
    if (rec.bias)
        out = apply_bias(out, bias_from_coarse(rec.bias->coarse_dims, rec.bias->coarse_log, v.geometry()));
    if (rec.resolution && rec.resolution->mode != ResolutionMode::Unchanged)
        out = resample_to_spacing(out, rec.resolution->spacing);
    if (rec.noise && rec.noise->sigma > 0.0)
        out = add_gaussian_noise(out, rec.noise->sigma, rec.noise->seed);
    return minmax_normalize(out);
}

} // namespace

std::pair<Volume, CorruptionRecord> corrupt(const Volume& v, Rng& rng, const SeverityConfig& cfg)
{
    cfg.validate();
    CorruptionRecord rec;
    rec.level = cfg.level;
    rec.seed = rng();
    // Each stage gets its own stream derived from the record seed.
    Rng bias_rng(derive_seed(rec.seed, "bias"));
    Rng res_rng(derive_seed(rec.seed, "resolution"));
    Rng noise_rng(derive_seed(rec.seed, "noise"));

    if (cfg.bias_enabled()) {
        BiasField b = sample_bias_field(bias_rng, cfg, v.geometry());
        rec.bias = BiasRecord{b.coarse_dims, std::move(b.coarse_log), b.mean, b.std};
    }
    if (cfg.resolution_enabled()) {
        rec.resolution = draw_resolution(res_rng, cfg, v.geometry().spacing);
    }
    if (cfg.noise_enabled())
        rec.noise = NoiseRecord{draw_noise_sigma(noise_rng, cfg), noise_rng()};

    return {run_stages(v, rec), std::move(rec)};
}

Volume replay(const Volume& v, const CorruptionRecord& record) { return run_stages(v, record); }

} // namespace brainid
