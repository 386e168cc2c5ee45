#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brainid/corruption.hpp"
#include "brainid/deformation.hpp"
#include "brainid/synthesis.hpp"
#include "brainid/volume.hpp"

namespace brainid {

struct SubjectRecord {
    std::string id;
    LabelMap labels;
    Volume mprage; // anatomy target, same grid as labels
};

struct GeneratorOptions {
    DeformationConfig deformation;
    ContrastConfig contrast;
};

struct Sample {
    Volume image;
    ContrastParams contrast;
    CorruptionRecord record;
    Level level = Level::Mild;
    std::uint64_t seed = 0;
    std::uint64_t deformation_id = 0;
};

struct SampleBatch {
    std::string subject_id;
    std::uint64_t base_seed = 0;
    DeformationField deformation; // shared by every sample
    LabelMap labels;              // warped label map
    Volume target;                // warped, min-max normalized MP-RAGE
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
};

// Evenly spaced picks from {Mild, Medium, Severe}; n = 4 gives Mild, Medium, Medium, Severe.
std::vector<Level> default_schedule(std::size_t n);

std::uint64_t sample_seed(std::uint64_t base_seed, const std::string& subject_id, std::size_t index);
std::uint64_t deformation_seed(std::uint64_t base_seed, const std::string& subject_id);

// One deformation, warped labels and target, then per sample: fresh contrast, painting and
// corruption at schedule[i]. The schedule must be non-decreasing in severity.
SampleBatch generate_batch(const SubjectRecord& subject, std::size_t n, std::uint64_t base_seed,
                           const std::vector<SeverityConfig>& schedule, const GeneratorOptions& options = {});
SampleBatch generate_batch(const SubjectRecord& subject, std::size_t n, std::uint64_t base_seed,
                           const std::vector<Level>& schedule, const GeneratorOptions& options = {});

// Anatomy loss summed over samples: mean |P_i - T| + lambda * sum_c mean |grad_c P_i - grad_c T|.
double batch_loss(const Volume& target, const std::vector<Volume>& predictions, double lambda = 1.0);
double batch_loss(const SampleBatch& batch, const std::vector<Volume>& predictions, double lambda = 1.0);

} // namespace brainid
