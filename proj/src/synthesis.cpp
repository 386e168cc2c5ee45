#include "brainid/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brainid/error.hpp"

namespace brainid {

ContrastParams sample_contrast_params(Rng& rng, const std::vector<std::int32_t>& labels, const ContrastConfig& cfg)
{
    if (labels.empty())
        throw Error(ErrorCode::EmptyLabelSet, "cannot sample contrast for an empty label set");
    ContrastParams params;
    for (std::int32_t l : labels) {
        // Both draws happen for every label, background included, so streams stay aligned.
        const double z = standard_normal(rng);
        const double z2 = standard_normal(rng);
        if (l == 0) {
            params.labels[l] = {0.0, 0.0};
            continue;
        }
        double mean = cfg.mean_center + cfg.mean_scale * z;
        if (const auto it = cfg.label_shift.find(l); it != cfg.label_shift.end())
            mean += it->second;
        params.labels[l] = {mean, std::abs(cfg.std_center + cfg.std_scale * z2)};
    }
    return params;
}

Volume paint_raw(const LabelMap& lm, const ContrastParams& params, Rng& rng)
{
    for (std::int32_t l : lm.label_set())
        if (!params.labels.contains(l))
            throw Error(ErrorCode::MissingLabelParams, "no contrast parameters for label " + std::to_string(l));

    // Lookup table avoids a map search per voxel.
    const std::int32_t max_label = lm.label_set().empty() ? 0 : lm.label_set().back();
    std::vector<LabelContrast> table(static_cast<std::size_t>(max_label) + 1);
    for (std::int32_t l : lm.label_set())
        table[static_cast<std::size_t>(l)] = params.labels.at(l);

    Volume out(lm.geometry());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < lm.size(); ++i) {
        const LabelContrast& c = table[static_cast<std::size_t>(lm[i])];
        out[i] = c.std > 0.0 ? c.mean + c.std * normal(rng) : c.mean;
    }
    return out;
}

Volume normalize_foreground(const Volume& v, const LabelMap& lm)
{
    require_same_geometry(v.geometry(), lm.geometry(), "normalize_foreground: label map grid differs");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (lm[i] == 0)
            continue;
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
    }
    Volume out(v.geometry());
    const double range = hi - lo;
    if (!(range > 0.0) || !std::isfinite(range))
        return out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = lm[i] == 0 ? 0.0 : (v[i] - lo) / range;
    return out;
}

Volume paint(const LabelMap& lm, const ContrastParams& params, Rng& rng)
{
    return normalize_foreground(paint_raw(lm, params, rng), lm);
}

} // namespace brainid
