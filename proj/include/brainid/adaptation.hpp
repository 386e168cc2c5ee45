#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "brainid/volume.hpp"

namespace brainid {

// Voxel-wise affine layer: out = x^T W + b, optionally followed by a softmax over outputs.
// When concat_input is set, the last input row of W belongs to the concatenated image.
struct LinearAdapter {
    Eigen::MatrixXd weights; // in_channels x out_channels
    Eigen::VectorXd bias;    // out_channels
    bool concat_input = false;
    bool softmax = false;

    std::size_t in_channels() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t out_channels() const { return static_cast<std::size_t>(weights.cols()); }
    // Feature channels expected, excluding a concatenated input image.
    std::size_t feature_channels() const { return in_channels() - (concat_input ? 1 : 0); }
};

// Closed-form ridge regression over all voxels: min ||X W + 1 b^T - Y||^2 + ridge ||W||^2.
// The bias is unpenalized. ridge = 0 with a rank-deficient design throws SingularSystem.
LinearAdapter fit_adapter(const VolumeStack& features, const VolumeStack& target, const Volume* concat_input = nullptr,
                          double ridge = 1e-6, bool softmax = false);

VolumeStack apply_adapter(const LinearAdapter& adapter, const VolumeStack& features, const Volume* concat_input = nullptr);

// Sum of squared and mean absolute residuals of the affine (pre-softmax) output.
struct Residual {
    double sse = 0.0;
    double l1 = 0.0;
};
Residual adapter_residual(const LinearAdapter& adapter, const VolumeStack& features, const VolumeStack& target,
                          const Volume* concat_input = nullptr);

// Channel k is the indicator of labels[k].
VolumeStack one_hot(const LabelMap& lm, const std::vector<std::int32_t>& labels);

// (1 - mean soft Dice over labels) + mean voxel cross-entropy. Channel k of probs scores
// labels[k]; empty labels means ref.label_set().
double soft_dice_ce_loss(const VolumeStack& probs, const LabelMap& ref, std::vector<std::int32_t> labels = {});

double l2_loss(const Volume& pred, const Volume& ref);

} // namespace brainid
