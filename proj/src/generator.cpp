#include "brainid/generator.hpp"

#include <cmath>
#include <string>

#include "brainid/error.hpp"
#include "brainid/parallel.hpp"

namespace brainid {

std::vector<Level> default_schedule(std::size_t n)
{
    static constexpr Level ladder[] = {Level::Mild, Level::Medium, Level::Severe};
    std::vector<Level> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double pos = n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
        out.push_back(ladder[static_cast<std::size_t>(std::lround(pos))]);
    }
    return out;
}

std::uint64_t sample_seed(std::uint64_t base_seed, const std::string& subject_id, std::size_t index)
{
    return derive_seed(base_seed, subject_id, index);
}

std::uint64_t deformation_seed(std::uint64_t base_seed, const std::string& subject_id)
{
    return derive_seed(base_seed, subject_id + "/deformation");
}

SampleBatch generate_batch(const SubjectRecord& subject, std::size_t n, std::uint64_t base_seed,
                           const std::vector<SeverityConfig>& schedule, const GeneratorOptions& options)
{
    if (n < 1)
        throw Error(ErrorCode::InvalidArgument, "batch size must be at least 1");
    if (schedule.size() != n)
        throw Error(ErrorCode::InvalidArgument, "schedule has " + std::to_string(schedule.size()) +
                                                    " entries for a batch of " + std::to_string(n));
    for (std::size_t i = 1; i < n; ++i)
        if (schedule[i].level < schedule[i - 1].level)
            throw Error(ErrorCode::InvalidArgument, "severity schedule must be non-decreasing");
    for (const auto& cfg : schedule)
        cfg.validate();
    require_same_geometry(subject.labels.geometry(), subject.mprage.geometry(),
                          ("subject " + subject.id + ": labels and MP-RAGE grids differ").c_str());
    const auto& labels = subject.labels.label_set();
    if (labels.empty() || (labels.size() == 1 && labels.front() == 0))
        throw Error(ErrorCode::EmptyLabelSet, "subject " + subject.id + " has no foreground labels");

    SampleBatch batch;
    batch.subject_id = subject.id;
    batch.base_seed = base_seed;

    const std::uint64_t def_seed = deformation_seed(base_seed, subject.id);
    Rng def_rng(def_seed);
    batch.deformation = generate_deformation(def_rng, options.deformation, subject.labels.geometry(), def_seed);
    batch.labels = warp_labels(subject.labels, batch.deformation);
    batch.target = minmax_normalize(warp_volume(subject.mprage, batch.deformation));

    batch.samples.resize(n);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Sample& s = batch.samples[i];
            s.seed = sample_seed(base_seed, subject.id, i);
            s.level = schedule[i].level;
            s.deformation_id = batch.deformation.id();
            Rng rng(s.seed);
            s.contrast = sample_contrast_params(rng, batch.labels.label_set(), options.contrast);
            const Volume painted = paint(batch.labels, s.contrast, rng);
            auto [image, record] = corrupt(painted, rng, schedule[i]);
            s.image = std::move(image);
            s.record = std::move(record);
        }
    });
    return batch;
}

SampleBatch generate_batch(const SubjectRecord& subject, std::size_t n, std::uint64_t base_seed,
                           const std::vector<Level>& schedule, const GeneratorOptions& options)
{
    std::vector<SeverityConfig> configs;
    configs.reserve(schedule.size());
    for (Level l : schedule) {
        SeverityConfig cfg = SeverityConfig::preset(l);
        cfg.deformation = options.deformation;
        configs.push_back(cfg);
    }
    return generate_batch(subject, n, base_seed, configs, options);
}

double batch_loss(const Volume& target, const std::vector<Volume>& predictions, double lambda)
{
    if (!(lambda > 0.0))
        throw Error(ErrorCode::NonPositiveLambda, "lambda must be positive, got " + std::to_string(lambda));
    const VolumeStack target_grad = spatial_gradient(target);
    const double n = static_cast<double>(target.size());
    double total = 0.0;
    for (const Volume& pred : predictions) {
        require_same_geometry(pred.geometry(), target.geometry(), "batch_loss: prediction grid differs from target");
        double intensity = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            intensity += std::abs(pred[i] - target[i]);
        const VolumeStack grad = spatial_gradient(pred);
        double gradient = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            double channel = 0.0;
            for (std::size_t i = 0; i < pred.size(); ++i)
                channel += std::abs(grad[c][i] - target_grad[c][i]);
            gradient += channel / n;
        }
        total += intensity / n + lambda * gradient;
    }
    return total;
}

double batch_loss(const SampleBatch& batch, const std::vector<Volume>& predictions, double lambda)
{
    if (predictions.size() != batch.size())
        throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(batch.size()) + " predictions, got " +
                                                    std::to_string(predictions.size()));
    return batch_loss(batch.target, predictions, lambda);
}

} // namespace brainid
