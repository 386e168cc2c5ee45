#include "brainid/serialization.hpp"

#include <string>

#include "brainid/error.hpp"

namespace brainid {

namespace {

template <typename T>
T required(const Json& j, const char* key)
{
    if (!j.contains(key))
        throw Error(ErrorCode::InvalidArgument, std::string("JSON document lacks field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("JSON field '") + key + "': " + e.what());
    }
}

} // namespace

Json to_json(const Geometry& g)
{
    Json affine = Json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            affine.push_back(g.grid_to_world(r, c));
    return {{"dims", g.dims}, {"spacing", g.spacing}, {"grid_to_world", affine}};
}

Geometry geometry_from_json(const Json& j)
{
    Geometry g;
    g.dims = required<Dims>(j, "dims");
    g.spacing = required<Spacing>(j, "spacing");
    const auto affine = required<std::vector<double>>(j, "grid_to_world");
    if (affine.size() != 16)
        throw Error(ErrorCode::InvalidArgument, "grid_to_world needs 16 entries");
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            g.grid_to_world(r, c) = affine[static_cast<std::size_t>(4 * r + c)];
    g.validate();
    return g;
}

Json to_json(const ContrastParams& params)
{
    Json labels = Json::array();
    for (const auto& [label, c] : params.labels)
        labels.push_back({{"label", label}, {"mean", c.mean}, {"std", c.std}});
    return {{"labels", labels}};
}

ContrastParams contrast_from_json(const Json& j)
{
    ContrastParams params;
    for (const auto& entry : required<Json>(j, "labels"))
        params.labels[required<std::int32_t>(entry, "label")] = {required<double>(entry, "mean"),
                                                                  required<double>(entry, "std")};
    return params;
}

Json to_json(const CorruptionRecord& record)
{
    Json j = {{"seed", record.seed}, {"level", std::string(to_string(record.level))}};
    j["bias"] = nullptr;
    j["resolution"] = nullptr;
    j["noise"] = nullptr;
    if (record.bias)
        j["bias"] = {{"coarse_dims", record.bias->coarse_dims},
                     {"coarse_log", record.bias->coarse_log},
                     {"mean", record.bias->mean},
                     {"std", record.bias->std}};
    if (record.resolution)
        j["resolution"] = {{"mode", std::string(to_string(record.resolution->mode))},
                           {"spacing", record.resolution->spacing},
                           {"axis", record.resolution->axis}};
    if (record.noise)
        j["noise"] = {{"sigma", record.noise->sigma}, {"sigma_255", record.noise->sigma * 255.0},
                      {"seed", record.noise->seed}};
    return j;
}

CorruptionRecord record_from_json(const Json& j)
{
    CorruptionRecord r;
    r.seed = required<std::uint64_t>(j, "seed");
    r.level = parse_level(required<std::string>(j, "level"));
    if (j.contains("bias") && !j["bias"].is_null()) {
        const Json& b = j["bias"];
        r.bias = BiasRecord{required<Dims>(b, "coarse_dims"), required<std::vector<double>>(b, "coarse_log"),
                            required<double>(b, "mean"), required<double>(b, "std")};
    }
    if (j.contains("resolution") && !j["resolution"].is_null()) {
        const Json& s = j["resolution"];
        r.resolution = ResolutionRecord{parse_resolution_mode(required<std::string>(s, "mode")),
                                        required<Spacing>(s, "spacing"), required<int>(s, "axis")};
    }
    if (j.contains("noise") && !j["noise"].is_null()) {
        const Json& n = j["noise"];
        r.noise = NoiseRecord{required<double>(n, "sigma"), required<std::uint64_t>(n, "seed")};
    }
    return r;
}

Json to_json(const AffineParams& a)
{
    return {{"rotation_deg", a.rotation_deg},
            {"scaling", a.scaling},
            {"shearing", a.shearing},
            {"translation_mm", a.translation_mm}};
}

AffineParams affine_from_json(const Json& j)
{
    AffineParams a;
    a.rotation_deg = required<std::array<double, 3>>(j, "rotation_deg");
    a.scaling = required<std::array<double, 3>>(j, "scaling");
    a.shearing = required<std::array<double, 3>>(j, "shearing");
    a.translation_mm = required<std::array<double, 3>>(j, "translation_mm");
    return a;
}

Json to_json(const SVF& svf)
{
    return {{"target", to_json(svf.target)},
            {"control_spacing_mm", svf.control_spacing_mm},
            {"coarse_dims", svf.coarse_dims},
            {"coarse", svf.coarse},
            {"amplitude_mm", svf.amplitude_mm},
            {"smoothing_sigma", svf.smoothing_sigma}};
}

SVF svf_from_json(const Json& j)
{
    SVF svf = SVF::zero(geometry_from_json(required<Json>(j, "target")), required<double>(j, "control_spacing_mm"));
    if (required<Dims>(j, "coarse_dims") != svf.coarse_dims)
        throw Error(ErrorCode::InvalidArgument, "SVF coarse_dims inconsistent with its target grid");
    svf.coarse = required<std::array<std::vector<double>, 3>>(j, "coarse");
    for (const auto& ch : svf.coarse)
        if (ch.size() != svf.coarse[0].size() || ch.size() != static_cast<std::size_t>(svf.coarse_dims[0]) *
                                                                    svf.coarse_dims[1] * svf.coarse_dims[2])
            throw Error(ErrorCode::InvalidArgument, "SVF coarse grid has the wrong number of entries");
    svf.amplitude_mm = required<double>(j, "amplitude_mm");
    svf.smoothing_sigma = required<double>(j, "smoothing_sigma");
    return svf;
}

Json to_json(const GeneratedProvenance& p)
{
    Json j = {{"affine", to_json(p.affine)}, {"steps", p.steps}};
    j["svf"] = p.svf ? to_json(*p.svf) : Json(nullptr);
    return j;
}

GeneratedProvenance provenance_from_json(const Json& j)
{
    GeneratedProvenance p;
    p.affine = affine_from_json(required<Json>(j, "affine"));
    p.steps = required<int>(j, "steps");
    if (j.contains("svf") && !j["svf"].is_null())
        p.svf = svf_from_json(j["svf"]);
    return p;
}

Json to_json(const LinearAdapter& adapter)
{
    std::vector<double> weights;
    weights.reserve(adapter.in_channels() * adapter.out_channels());
    for (Eigen::Index r = 0; r < adapter.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < adapter.weights.cols(); ++c)
            weights.push_back(adapter.weights(r, c));
    std::vector<double> bias(adapter.bias.data(), adapter.bias.data() + adapter.bias.size());
    return {{"in_channels", adapter.in_channels()},
            {"out_channels", adapter.out_channels()},
            {"concat_input", adapter.concat_input},
            {"softmax", adapter.softmax},
            {"weights", weights},
            {"bias", bias}};
}

LinearAdapter adapter_from_json(const Json& j)
{
    const auto in = required<std::size_t>(j, "in_channels");
    const auto out = required<std::size_t>(j, "out_channels");
    const auto weights = required<std::vector<double>>(j, "weights");
    const auto bias = required<std::vector<double>>(j, "bias");
    if (weights.size() != in * out || bias.size() != out)
        throw Error(ErrorCode::InvalidArgument, "adapter weights/bias sizes do not match its shape");
    LinearAdapter a;
    a.weights.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    for (std::size_t r = 0; r < in; ++r)
        for (std::size_t c = 0; c < out; ++c)
            a.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = weights[r * out + c];
    a.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(out));
    a.concat_input = required<bool>(j, "concat_input");
    a.softmax = required<bool>(j, "softmax");
    if (a.concat_input && in < 1)
        throw Error(ErrorCode::InvalidArgument, "concat adapter needs at least one input row");
    return a;
}

Json to_json(const MetricReport& report)
{
    Json metrics = Json::object();
    for (const auto& m : report.metrics)
        metrics[m.name] = {{"mean", m.mean}, {"std", m.std}, {"values", m.values}};
    return {{"mode", report.mode == RobustnessMode::Intra ? "intra" : "inter"},
            {"candidates", report.candidates},
            {"channels", report.channels},
            {"masked", report.masked},
            {"metrics", metrics}};
}

} // namespace brainid
