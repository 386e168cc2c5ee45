#pragma once

#include <cstdint>
#include <string>

#include "brainid/generator.hpp"

namespace brainid {

// Label values used by the synthetic head phantom.
namespace phantom_labels {
inline constexpr std::int32_t kCsf = 1;
inline constexpr std::int32_t kCortex = 2;
inline constexpr std::int32_t kWhiteMatter = 3;
inline constexpr std::int32_t kDeepLeft = 4;
inline constexpr std::int32_t kDeepRight = 5;
inline constexpr std::int32_t kVentricle = 6;
} // namespace phantom_labels

// Nested-ellipsoid head with a folded cortex, deep grey nuclei and ventricles. The seed
// jitters radii and folding so different seeds behave like different subjects. The MP-RAGE
// is a T1-like lookup of the labels, lightly blurred.
SubjectRecord make_phantom(std::uint64_t seed, Dims dims = {64, 64, 64}, double spacing_mm = 1.0,
                           std::string id = {});

} // namespace brainid
