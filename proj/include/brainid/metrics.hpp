#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "brainid/deformation.hpp"
#include "brainid/volume.hpp"

namespace brainid {

// Voxel mask: empty span means the whole grid, otherwise one byte per voxel (non-zero = in).
using Mask = std::span<const std::uint8_t>;

double l1(const Volume& a, const Volume& b, Mask mask = {});

// 10 log10(peak^2 / MSE); +infinity when MSE is 0.
double psnr(const Volume& pred, const Volume& ref, double peak = 1.0, Mask mask = {});

struct SsimOptions {
    int window = 7; // uniform cubic window
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

// Mean SSIM over window centres whose full window lies inside the grid (and inside the mask).
double ssim(const Volume& a, const Volume& b, const SsimOptions& opts = {}, Mask mask = {});

// Product of per-scale mean contrast-structure terms (scales 1..M-1) and the full SSIM at
// scale M, weighted by the first M conventional MS-SSIM weights renormalized to sum 1.
double ms_ssim(const Volume& a, const Volume& b, int scales = 3, const SsimOptions& opts = {}, Mask mask = {});

// 2x2x2 mean pooling (dims halved, floor) with doubled spacing.
Volume downsample2(const Volume& v);

struct DiceResult {
    std::map<std::int32_t, double> per_label; // only labels present in pred or ref
    double mean = 0.0;
};

// Default labels: union of both maps' labels except background 0.
DiceResult dice(const LabelMap& pred, const LabelMap& ref, const std::vector<std::int32_t>& labels = {});

// Scale-invariant bias-field error: w = sum(t e) / sum(e^2), sqrt(sum (w e - t)^2 / sum t^2).
double norm_l2_bias(const Volume& estimate, const Volume& truth, Mask mask = {});

// Warps every channel through invert(phi).
VolumeStack canonical_features(const VolumeStack& features, const DeformationField& phi);

// Resamples every channel through psi onto psi's grid. If `atlas` is given, psi must live on it.
VolumeStack atlas_features(const VolumeStack& features, const DeformationField& psi,
                           const std::optional<Geometry>& atlas = std::nullopt);

enum class RobustnessMode { Intra, Inter };

struct MetricSummary {
    std::string name;
    double mean = 0.0;
    double std = 0.0; // population std over all (candidate, channel) pairs
    std::vector<double> values;
};

struct MetricReport {
    RobustnessMode mode = RobustnessMode::Intra;
    std::size_t candidates = 0;
    std::size_t channels = 0;
    bool masked = false;
    std::vector<MetricSummary> metrics; // L1, SSIM, MS-SSIM

    const MetricSummary& metric(const std::string& name) const;
};

MetricSummary summarize(std::string name, std::vector<double> values);

struct Candidate {
    VolumeStack features;
    DeformationField field; // phi for intra mode, psi for inter mode
};

// Intra: candidates are canonicalized through invert(phi); inter: resampled through psi.
// Each channel is compared to the matching reference channel.
MetricReport robustness_protocol(const VolumeStack& reference, const std::vector<Candidate>& candidates,
                                 RobustnessMode mode, Mask mask = {}, int ms_ssim_scales = 3);

std::string format_report_table(const MetricReport& report);

} // namespace brainid
