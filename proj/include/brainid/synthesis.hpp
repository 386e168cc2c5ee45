#pragma once

#include <cstdint>
#include <map>

#include "brainid/random.hpp"
#include "brainid/volume.hpp"

namespace brainid {

// Shift/scale hyperparameters for the per-label Gaussian draws.
struct ContrastConfig {
    double mean_center = 0.5;  // m_mu
    double mean_scale = 0.25;  // s_mu
    double std_center = 0.05;  // m_sigma
    double std_scale = 0.05;   // s_sigma
    std::map<std::int32_t, double> label_shift; // optional additive shift on mu_l
};

struct LabelContrast {
    double mean = 0.0;
    double std = 0.0;
};

struct ContrastParams {
    std::map<std::int32_t, LabelContrast> labels;
};

// mu_l = m_mu + s_mu z (+ shift_l), sigma_l = |m_sigma + s_sigma z'|; label 0 pinned to (0, 0).
ContrastParams sample_contrast_params(Rng& rng, const std::vector<std::int32_t>& labels, const ContrastConfig& cfg);

// Raw painting: voxel ~ N(mu_l, sigma_l), independent per voxel, no normalization.
Volume paint_raw(const LabelMap& lm, const ContrastParams& params, Rng& rng);

// paint_raw() followed by min-max normalization over foreground voxels; background stays 0.
Volume paint(const LabelMap& lm, const ContrastParams& params, Rng& rng);

// Min-max over voxels with label != 0, background forced to 0. Constant foreground -> zeros.
Volume normalize_foreground(const Volume& v, const LabelMap& lm);

} // namespace brainid
