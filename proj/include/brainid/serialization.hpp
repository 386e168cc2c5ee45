#pragma once

#include "json.hpp"

#include "brainid/adaptation.hpp"
#include "brainid/corruption.hpp"
#include "brainid/deformation.hpp"
#include "brainid/metrics.hpp"
#include "brainid/synthesis.hpp"

namespace brainid {

using Json = nlohmann::json;

Json to_json(const Geometry& g);
Geometry geometry_from_json(const Json& j);

Json to_json(const ContrastParams& params); // {"labels": [{"label", "mean", "std"}, ...]}
ContrastParams contrast_from_json(const Json& j);

Json to_json(const CorruptionRecord& record);
CorruptionRecord record_from_json(const Json& j);

Json to_json(const AffineParams& a);
AffineParams affine_from_json(const Json& j);

Json to_json(const SVF& svf);
SVF svf_from_json(const Json& j);

Json to_json(const GeneratedProvenance& p);
GeneratedProvenance provenance_from_json(const Json& j);

Json to_json(const LinearAdapter& adapter); // weights row-major, in_channels x out_channels
LinearAdapter adapter_from_json(const Json& j);

Json to_json(const MetricReport& report);

} // namespace brainid
