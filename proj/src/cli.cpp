#include "brainid/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "brainid/adaptation.hpp"
#include "brainid/corruption.hpp"
#include "brainid/error.hpp"
#include "brainid/generator.hpp"
#include "brainid/metrics.hpp"
#include "brainid/nifti.hpp"
#include "brainid/phantom.hpp"
#include "brainid/serialization.hpp"

namespace brainid {

namespace fs = std::filesystem;

namespace {

// Raised for flag combinations CLI11 cannot express; maps to the usage exit code.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::Io:
    case ErrorCode::BadMagic:
    case ErrorCode::BadHeader:
    case ErrorCode::UnsupportedDatatype:
    case ErrorCode::TruncatedData:
    case ErrorCode::NonPositivePixdim: return exit_code::kIo;
    case ErrorCode::GeometryMismatch: return exit_code::kGeometry;
    case ErrorCode::ChannelMismatch: return exit_code::kChannels;
    case ErrorCode::SingularSystem: return exit_code::kSingular;
    case ErrorCode::InvalidArgument: return exit_code::kUsage;
    default: return exit_code::kFailure;
    }
}

// Strips the "<Code>: " prefix so a rethrow with file context does not repeat it.
std::string bare_message(const Error& e)
{
    const std::string what = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

template <typename F>
auto with_path(const fs::path& path, F&& f)
{
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Io)
            throw;
        throw Error(e.code(), path.string() + ": " + bare_message(e));
    }
}

Volume load_volume(const fs::path& p)
{
    return with_path(p, [&] { return nifti::read_volume(nifti::read_file(p)); });
}
LabelMap load_labels(const fs::path& p)
{
    return with_path(p, [&] { return nifti::read_labels(nifti::read_file(p)); });
}
VolumeStack load_stack(const fs::path& p)
{
    return with_path(p, [&] { return nifti::read_stack(nifti::read_file(p)); });
}

DeformationField load_deformation(const fs::path& p, const Json* provenance = nullptr, std::uint64_t id = 0)
{
    VolumeStack disp = load_stack(p);
    if (disp.channel_count() != 3)
        throw Error(ErrorCode::ChannelMismatch,
                    p.string() + ": deformation needs 3 displacement channels, found " +
                        std::to_string(disp.channel_count()));
    Provenance prov;
    if (provenance && !provenance->is_null()) {
        prov.kind = ProvenanceKind::Generated;
        prov.source = provenance_from_json(*provenance);
    }
    return DeformationField(std::move(disp), std::move(prov), id);
}

void require_readable(const fs::path& p)
{
    std::error_code ec;
    if (!fs::is_regular_file(p, ec))
        throw Error(ErrorCode::Io, "cannot read '" + p.string() + "': no such file");
}

void prepare_output_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw Error(ErrorCode::Io, "cannot create output directory '" + dir.string() + "'");
}

void prepare_output_file(const fs::path& file)
{
    if (file.has_parent_path())
        prepare_output_dir(file.parent_path());
}

void write_text(const fs::path& path, const std::string& text)
{
    nifti::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Json load_json(const fs::path& path)
{
    const auto bytes = nifti::read_file(path);
    try {
        return Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

std::string fixed6(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos)
            out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

// ---------------------------------------------------------------------------------------
// Config file: INI-style "key = value" lines, '#' comments, optional [section] headers.

struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
    std::optional<std::string> schedule;
    std::optional<double> lambda;
    std::optional<std::string> subject;
    GeneratorOptions options;
    std::map<Level, SeverityConfig> severity{{Level::None, SeverityConfig::none()},
                                             {Level::Mild, SeverityConfig::preset(Level::Mild)},
                                             {Level::Medium, SeverityConfig::preset(Level::Medium)},
                                             {Level::Severe, SeverityConfig::preset(Level::Severe)}};

    SeverityConfig level_config(Level l) const
    {
        SeverityConfig cfg = severity.at(l);
        cfg.deformation = options.deformation;
        return cfg;
    }
};

double to_double(const std::string& key, const std::string& value)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return d;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': '" + value + "' is not a number");
    }
}

void apply_severity_key(SeverityConfig& cfg, const std::string& key, const std::string& full, const std::string& value)
{
    const double d = to_double(full, value);
    static const std::map<std::string, Range SeverityConfig::*> ranges{
        {"low_field_spacing", &SeverityConfig::low_field_spacing_mm},
        {"anisotropic_spacing", &SeverityConfig::anisotropic_spacing_mm},
        {"bias_mean", &SeverityConfig::bias_mean},
        {"bias_std", &SeverityConfig::bias_std},
        {"noise_std", &SeverityConfig::noise_std_255},
    };
    if (key == "p_low_field")
        cfg.p_low_field = d;
    else if (key == "p_anisotropic")
        cfg.p_anisotropic = d;
    else if (key == "bias_grid")
        cfg.bias_grid = static_cast<int>(d);
    else {
        for (const auto& [stem, member] : ranges) {
            if (key == stem + "_min") {
                (cfg.*member).min = d;
                return;
            }
            if (key == stem + "_max") {
                (cfg.*member).max = d;
                return;
            }
        }
        throw UsageError("unknown config key '" + full + "'");
    }
}

void apply_deformation_key(DeformationConfig& cfg, const std::string& key, const std::string& full,
                           const std::string& value)
{
    const double d = to_double(full, value);
    static const std::map<std::string, double DeformationConfig::*> keys{
        {"rotation_max_deg", &DeformationConfig::rotation_max_deg},
        {"shearing_max", &DeformationConfig::shearing_max},
        {"scaling_max", &DeformationConfig::scaling_max},
        {"translation_max_mm", &DeformationConfig::translation_max_mm},
        {"svf_scale_min", &DeformationConfig::svf_scale_min},
        {"svf_scale_max", &DeformationConfig::svf_scale_max},
        {"svf_sigma_max", &DeformationConfig::svf_sigma_max},
        {"control_spacing_mm", &DeformationConfig::control_spacing_mm},
    };
    if (key == "integration_steps") {
        cfg.integration_steps = static_cast<int>(d);
        return;
    }
    const auto it = keys.find(key);
    if (it == keys.end())
        throw UsageError("unknown config key '" + full + "'");
    cfg.*(it->second) = d;
}

void apply_contrast_key(ContrastConfig& cfg, const std::string& key, const std::string& full, const std::string& value)
{
    const double d = to_double(full, value);
    if (key == "mean_center")
        cfg.mean_center = d;
    else if (key == "mean_scale")
        cfg.mean_scale = d;
    else if (key == "std_center")
        cfg.std_center = d;
    else if (key == "std_scale")
        cfg.std_scale = d;
    else if (key.rfind("label_shift_", 0) == 0)
        cfg.label_shift[static_cast<std::int32_t>(to_double(full, key.substr(12)))] = d;
    else
        throw UsageError("unknown config key '" + full + "'");
}

RunConfig load_config(const fs::path& path)
{
    require_readable(path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_file(path.string());
    } catch (const CLI::Error& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
    RunConfig rc;
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--")
            continue; // section open/close markers
        std::string value;
        for (std::size_t i = 0; i < item.inputs.size(); ++i)
            value += (i ? "," : "") + item.inputs[i];
        const std::string full = item.fullname();
        const std::string section = item.parents.empty() ? std::string() : item.parents.front();
        if (item.parents.size() > 1)
            throw UsageError("config key '" + full + "' is nested too deeply");

        if (section.empty()) {
            if (item.name == "seed")
                rc.seed = static_cast<std::uint64_t>(std::stoull(value));
            else if (item.name == "n")
                rc.n = static_cast<std::size_t>(std::stoull(value));
            else if (item.name == "schedule")
                rc.schedule = value;
            else if (item.name == "lambda")
                rc.lambda = to_double(full, value);
            else if (item.name == "subject")
                rc.subject = value;
            else
                throw UsageError("unknown config key '" + full + "'");
        } else if (section == "deformation") {
            apply_deformation_key(rc.options.deformation, item.name, full, value);
        } else if (section == "contrast") {
            apply_contrast_key(rc.options.contrast, item.name, full, value);
        } else if (section == "mild" || section == "medium" || section == "severe") {
            apply_severity_key(rc.severity.at(parse_level(section)), item.name, full, value);
        } else {
            throw UsageError("unknown config section '" + section + "'");
        }
    }
    for (const auto& [level, cfg] : rc.severity)
        cfg.validate();
    rc.options.deformation.validate();
    return rc;
}

std::vector<std::uint8_t> stack_mask(const std::optional<fs::path>& path, const Geometry& g, int erode)
{
    if (!path)
        return {};
    const LabelMap lm = load_labels(*path);
    require_same_geometry(lm.geometry(), g, ("mask " + path->string() + " grid differs").c_str());
    return eroded_foreground(lm, erode);
}

// ---------------------------------------------------------------------------------------

struct GenerateArgs {
    fs::path labels, mprage, out = "out", config;
    std::size_t n = 4;
    std::uint64_t seed = 0;
    std::string schedule;
    double lambda = 1.0;
    std::string subject;
};

int cmd_generate(const GenerateArgs& a, const CLI::App& sub, std::ostream& out)
{
    RunConfig rc;
    if (!a.config.empty())
        rc = load_config(a.config);
    const auto given = [&](const char* flag) { return sub.get_option(flag)->count() > 0; };

    std::uint64_t seed = given("--seed") ? a.seed : rc.seed.value_or(0);
    if (!given("--seed") && !rc.seed)
        throw UsageError("generate: --seed is required (or 'seed' in the config file)");
    const std::size_t n = given("--n") ? a.n : rc.n.value_or(a.n);
    const double lambda = given("--lambda") ? a.lambda : rc.lambda.value_or(a.lambda);
    const std::string schedule_text = given("--schedule") ? a.schedule : rc.schedule.value_or("");
    std::string subject = given("--subject") ? a.subject : rc.subject.value_or("");
    if (subject.empty())
        subject = a.labels.stem().string();
    if (n < 1)
        throw UsageError("generate: --n must be at least 1");
    if (!(lambda > 0.0))
        throw UsageError("generate: --lambda must be positive");

    std::vector<std::string> names;
    std::vector<Level> levels;
    if (schedule_text.empty()) {
        levels = default_schedule(n);
        for (Level l : levels)
            names.emplace_back(to_string(l));
    } else {
        names = split_list(schedule_text);
        for (const auto& s : names) {
            if (s != "mild" && s != "medium" && s != "severe")
                throw UsageError("generate: schedule entries must be mild, medium or severe, got '" + s + "'");
            levels.push_back(parse_level(s));
        }
        if (names.size() != n)
            throw UsageError("generate: schedule lists " + std::to_string(names.size()) + " levels for --n " +
                             std::to_string(n));
    }

    require_readable(a.labels);
    require_readable(a.mprage);
    prepare_output_dir(a.out);

    SubjectRecord rec{subject, load_labels(a.labels), load_volume(a.mprage)};
    if (!same_geometry(rec.labels.geometry(), rec.mprage.geometry()))
        throw Error(ErrorCode::GeometryMismatch,
                    a.mprage.string() + ": grid differs from labels " + a.labels.string());

    std::vector<SeverityConfig> configs;
    for (Level l : levels)
        configs.push_back(rc.level_config(l));
    const SampleBatch batch = generate_batch(rec, n, seed, configs, rc.options);

    Json manifest;
    manifest["subject"] = subject;
    manifest["seed"] = seed;
    manifest["n"] = n;
    manifest["schedule"] = schedule_text.empty() ? Json(names) : Json(schedule_text);
    manifest["levels"] = names;
    manifest["lambda"] = lambda;
    manifest["inputs"] = {{"labels", a.labels.string()}, {"mprage", a.mprage.string()}};
    manifest["geometry"] = to_json(batch.target.geometry());
    manifest["target"] = "target.nii";
    manifest["labels"] = "labels_warped.nii";

    const auto& prov = batch.deformation.provenance();
    const Json prov_json = prov.source ? to_json(*prov.source) : Json();
    manifest["deformation"] = {{"file", "deformation.nii"}, {"id", batch.deformation.id()}, {"provenance", prov_json}};

    Json samples = Json::array();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Sample& s = batch.samples[i];
        char name[32];
        std::snprintf(name, sizeof name, "sample_%03zu.nii", i);
        nifti::save(a.out / name, nifti::write_nifti(s.image));
        samples.push_back({{"file", name},
                           {"index", i},
                           {"level", to_string(s.level)},
                           {"seed", s.seed},
                           {"deformation_id", s.deformation_id},
                           {"contrast", to_json(s.contrast)},
                           {"corruption", to_json(s.record)},
                           {"loss_vs_target", batch_loss(batch.target, {s.image}, lambda)}});
    }
    manifest["samples"] = samples;
    manifest["candidates"] = Json::array(
        {{{"features", "target.nii"}, {"deformation", "deformation.nii"}, {"deformation_id", batch.deformation.id()},
          {"provenance", prov_json}}});

    nifti::save(a.out / "target.nii", nifti::write_nifti(batch.target));
    nifti::save(a.out / "labels_warped.nii", nifti::write_nifti(batch.labels));
    nifti::save(a.out / "deformation.nii", nifti::write_nifti(batch.deformation.displacement(), nifti::StackLayout::Vector));
    write_text(a.out / "manifest.json", manifest.dump(2) + "\n");

    out << "wrote " << n << " samples to " << a.out.string() << "\n";
    return exit_code::kOk;
}

// ---------------------------------------------------------------------------------------

struct EvaluateArgs {
    std::string mode = "intra";
    fs::path reference;
    std::vector<fs::path> manifests;
    std::optional<fs::path> atlas_map;
    std::optional<fs::path> mask;
    int erode = 0;
    int scales = 3;
    fs::path out = "report.json";
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out)
{
    const RobustnessMode mode = a.mode == "inter" ? RobustnessMode::Inter : RobustnessMode::Intra;
    if (mode == RobustnessMode::Inter && !a.atlas_map)
        throw UsageError("evaluate: --atlas-map is required in inter mode");
    require_readable(a.reference);
    for (const auto& m : a.manifests)
        require_readable(m);
    if (a.atlas_map)
        require_readable(*a.atlas_map);
    prepare_output_file(a.out);

    const VolumeStack reference = load_stack(a.reference);
    std::optional<DeformationField> shared_psi;
    if (mode == RobustnessMode::Inter)
        shared_psi = load_deformation(*a.atlas_map);

    std::vector<Candidate> candidates;
    for (const auto& manifest_path : a.manifests) {
        const Json manifest = load_json(manifest_path);
        const fs::path base = manifest_path.parent_path();
        if (!manifest.contains("candidates") || !manifest["candidates"].is_array())
            throw Error(ErrorCode::InvalidArgument, manifest_path.string() + ": no 'candidates' array");
        for (const auto& c : manifest["candidates"]) {
            const VolumeStack features = load_stack(base / c.at("features").get<std::string>());
            if (mode == RobustnessMode::Intra) {
                const Json* prov = c.contains("provenance") ? &c["provenance"] : nullptr;
                const std::uint64_t id = c.value("deformation_id", std::uint64_t{0});
                candidates.push_back({features, load_deformation(base / c.at("deformation").get<std::string>(), prov, id)});
            } else if (c.contains("atlas_map")) {
                candidates.push_back({features, load_deformation(base / c["atlas_map"].get<std::string>())});
            } else {
                candidates.push_back({features, *shared_psi});
            }
        }
    }
    if (candidates.empty())
        throw Error(ErrorCode::InvalidArgument, "evaluate: the manifests list no candidates");

    const Geometry& mask_grid = mode == RobustnessMode::Intra ? reference.geometry() : shared_psi->geometry();
    const auto mask = stack_mask(a.mask, mask_grid, a.erode);
    const MetricReport report = robustness_protocol(reference, candidates, mode, mask, a.scales);

    Json j = to_json(report);
    j["reference"] = a.reference.string();
    write_text(a.out, j.dump(2) + "\n");
    out << format_report_table(report);
    return exit_code::kOk;
}

// ---------------------------------------------------------------------------------------

struct AdapterArgs {
    fs::path features, target, target_labels, concat, out = "adapter.json", adapter;
    double ridge = 1e-6;
    bool softmax = false;
};

int cmd_fit_adapter(const AdapterArgs& a, std::ostream& out)
{
    if (a.target.empty() == a.target_labels.empty())
        throw UsageError("fit-adapter: give exactly one of --target or --target-labels");
    require_readable(a.features);
    require_readable(a.target.empty() ? a.target_labels : a.target);
    if (!a.concat.empty())
        require_readable(a.concat);
    prepare_output_file(a.out);

    const VolumeStack features = load_stack(a.features);
    std::optional<Volume> concat;
    if (!a.concat.empty())
        concat = load_volume(a.concat);

    VolumeStack target;
    std::vector<std::int32_t> labels;
    if (!a.target.empty()) {
        target = load_stack(a.target);
    } else {
        const LabelMap lm = load_labels(a.target_labels);
        labels = lm.label_set();
        target = one_hot(lm, labels);
    }
    const Volume* concat_ptr = concat ? &*concat : nullptr;
    const LinearAdapter adapter = fit_adapter(features, target, concat_ptr, a.ridge, a.softmax);
    const Residual r = adapter_residual(adapter, features, target, concat_ptr);

    Json j = to_json(adapter);
    j["ridge"] = a.ridge;
    j["residual"] = {{"sse", r.sse}, {"l1", r.l1}};
    if (!labels.empty())
        j["labels"] = labels;
    write_text(a.out, j.dump(2) + "\n");

    char buf[128];
    std::snprintf(buf, sizeof buf, "residual_l1 %.6e\nresidual_sse %.6e\n", r.l1, r.sse);
    out << buf;
    return exit_code::kOk;
}

int cmd_apply_adapter(const AdapterArgs& a, std::ostream& out)
{
    require_readable(a.adapter);
    require_readable(a.features);
    if (!a.concat.empty())
        require_readable(a.concat);
    prepare_output_file(a.out);

    const LinearAdapter adapter = adapter_from_json(load_json(a.adapter));
    const VolumeStack features = load_stack(a.features);
    std::optional<Volume> concat;
    if (!a.concat.empty())
        concat = load_volume(a.concat);
    const VolumeStack pred = apply_adapter(adapter, features, concat ? &*concat : nullptr);
    nifti::save(a.out, nifti::write_nifti(pred));
    out << "wrote " << pred.channel_count() << " channels to " << a.out.string() << "\n";
    return exit_code::kOk;
}

// ---------------------------------------------------------------------------------------

struct MetricsArgs {
    fs::path pred, ref;
    std::string metric;
    std::optional<fs::path> mask;
    int erode = 0;
    int scales = 3;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out)
{
    require_readable(a.pred);
    require_readable(a.ref);
    if (a.metric == "dice") {
        const LabelMap pred = load_labels(a.pred);
        const LabelMap ref = load_labels(a.ref);
        const DiceResult d = dice(pred, ref);
        out << fixed6(d.mean) << "\n";
        for (const auto& [label, value] : d.per_label)
            out << "label " << label << " " << fixed6(value) << "\n";
        return exit_code::kOk;
    }
    const Volume pred = load_volume(a.pred);
    const Volume ref = load_volume(a.ref);
    const auto mask = stack_mask(a.mask, ref.geometry(), a.erode);
    double value = 0.0;
    if (a.metric == "l1")
        value = l1(pred, ref, mask);
    else if (a.metric == "psnr")
        value = psnr(pred, ref, 1.0, mask);
    else if (a.metric == "ssim")
        value = ssim(pred, ref, {}, mask);
    else if (a.metric == "msssim")
        value = ms_ssim(pred, ref, a.scales, {}, mask);
    else
        value = norm_l2_bias(pred, ref, mask);
    out << fixed6(value) << "\n";
    return exit_code::kOk;
}

// ---------------------------------------------------------------------------------------

struct CorruptArgs {
    fs::path input, out, record, config;
    std::string level = "mild";
    std::uint64_t seed = 0;
};

int cmd_corrupt(const CorruptArgs& a, const CLI::App& sub, std::ostream& out)
{
    RunConfig rc;
    if (!a.config.empty())
        rc = load_config(a.config);
    const bool seed_flag = sub.get_option("--seed")->count() > 0;
    if (!seed_flag && !rc.seed)
        throw UsageError("corrupt: --seed is required (or 'seed' in the config file)");
    const std::uint64_t seed = seed_flag ? a.seed : *rc.seed;
    require_readable(a.input);
    prepare_output_file(a.out);
    if (!a.record.empty())
        prepare_output_file(a.record);

    const Volume v = load_volume(a.input);
    Rng rng(seed);
    auto [image, record] = corrupt(v, rng, rc.level_config(parse_level(a.level)));
    nifti::save(a.out, nifti::write_nifti(image));
    if (!a.record.empty())
        write_text(a.record, to_json(record).dump(2) + "\n");
    out << "wrote " << a.out.string() << "\n";
    return exit_code::kOk;
}

struct PhantomArgs {
    fs::path out = ".";
    std::uint64_t seed = 1;
    int size = 64;
    double spacing = 1.0;
};

int cmd_phantom(const PhantomArgs& a, std::ostream& out)
{
    prepare_output_dir(a.out);
    const SubjectRecord s = make_phantom(a.seed, {a.size, a.size, a.size}, a.spacing);
    nifti::save(a.out / "labels.nii", nifti::write_nifti(s.labels));
    nifti::save(a.out / "mprage.nii", nifti::write_nifti(s.mprage));
    out << "wrote labels.nii and mprage.nii to " << a.out.string() << "\n";
    return exit_code::kOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Synthetic brain MRI generation, corruption and feature evaluation", "brainid"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate one batch of synthetic samples from a subject");
    generate->add_option("labels", gen.labels, "Label map (NIfTI)")->required();
    generate->add_option("mprage", gen.mprage, "MP-RAGE on the label grid (NIfTI)")->required();
    generate->add_option("--n", gen.n, "Samples per batch")->capture_default_str();
    generate->add_option("--seed", gen.seed, "Base seed (required here or in the config)");
    generate->add_option("--schedule", gen.schedule, "Comma-separated mild/medium/severe, one per sample");
    generate->add_option("--out", gen.out, "Output directory")->capture_default_str();
    generate->add_option("--config", gen.config, "Key-value config file");
    generate->add_option("--lambda", gen.lambda, "Gradient weight of the anatomy loss")->capture_default_str();
    generate->add_option("--subject", gen.subject, "Subject id (default: label file stem)");

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Feature robustness protocol over generated candidates");
    evaluate->add_option("--mode", ev.mode, "intra or inter")->check(CLI::IsMember({"intra", "inter"}))->capture_default_str();
    evaluate->add_option("--reference", ev.reference, "Reference feature stack (NIfTI)")->required();
    evaluate->add_option("--candidates", ev.manifests, "One or more generate manifests")->required();
    evaluate->add_option("--atlas-map", ev.atlas_map, "Atlas deformation (inter mode)");
    evaluate->add_option("--mask", ev.mask, "Label map; metrics restricted to its foreground");
    evaluate->add_option("--erode", ev.erode, "Mask erosion radius in voxels")->check(CLI::NonNegativeNumber);
    evaluate->add_option("--scales", ev.scales, "MS-SSIM scales")->check(CLI::PositiveNumber)->capture_default_str();
    evaluate->add_option("--out", ev.out, "Report JSON path")->capture_default_str();

    AdapterArgs fit;
    auto* fit_cmd = app.add_subcommand("fit-adapter", "Fit a voxel-wise linear adapter in closed form");
    fit_cmd->add_option("--features", fit.features, "Feature stack (NIfTI)")->required();
    fit_cmd->add_option("--target", fit.target, "Regression target stack (NIfTI)");
    fit_cmd->add_option("--target-labels", fit.target_labels, "Label map, one-hot encoded as the target");
    fit_cmd->add_option("--concat-input", fit.concat, "Input image appended as an extra channel");
    fit_cmd->add_option("--ridge", fit.ridge, "Ridge penalty")->check(CLI::NonNegativeNumber)->capture_default_str();
    fit_cmd->add_flag("--softmax", fit.softmax, "Apply a softmax over outputs when applied");
    fit_cmd->add_option("--out", fit.out, "Adapter JSON path")->capture_default_str();

    AdapterArgs app_args;
    auto* apply_cmd = app.add_subcommand("apply-adapter", "Apply a fitted adapter to a feature stack");
    apply_cmd->add_option("--adapter", app_args.adapter, "Adapter JSON")->required();
    apply_cmd->add_option("--features", app_args.features, "Feature stack (NIfTI)")->required();
    apply_cmd->add_option("--concat-input", app_args.concat, "Input image if the adapter was fitted with one");
    apply_cmd->add_option("--out", app_args.out, "Output stack (NIfTI)")->required();

    MetricsArgs met;
    auto* metrics = app.add_subcommand("metrics", "Compare two volumes");
    metrics->add_option("--pred", met.pred, "Prediction (NIfTI)")->required();
    metrics->add_option("--ref", met.ref, "Reference (NIfTI)")->required();
    metrics->add_option("--metric", met.metric, "l1, psnr, ssim, msssim, dice or norml2")
        ->required()
        ->check(CLI::IsMember({"l1", "psnr", "ssim", "msssim", "dice", "norml2"}));
    metrics->add_option("--mask", met.mask, "Label map; metrics restricted to its foreground");
    metrics->add_option("--erode", met.erode, "Mask erosion radius in voxels")->check(CLI::NonNegativeNumber);
    metrics->add_option("--scales", met.scales, "MS-SSIM scales")->check(CLI::PositiveNumber)->capture_default_str();

    CorruptArgs cor;
    auto* corrupt_cmd = app.add_subcommand("corrupt", "Apply one severity preset to an image");
    corrupt_cmd->add_option("--input", cor.input, "Image in [0, 1] (NIfTI)")->required();
    corrupt_cmd->add_option("--level", cor.level, "none, mild, medium or severe")
        ->check(CLI::IsMember({"none", "mild", "medium", "severe"}))
        ->capture_default_str();
    corrupt_cmd->add_option("--seed", cor.seed, "Seed (required here or in the config)");
    corrupt_cmd->add_option("--out", cor.out, "Output image (NIfTI)")->required();
    corrupt_cmd->add_option("--record", cor.record, "Write the corruption record as JSON");
    corrupt_cmd->add_option("--config", cor.config, "Key-value config file");

    PhantomArgs ph;
    auto* phantom = app.add_subcommand("phantom", "Write a synthetic head phantom (labels.nii, mprage.nii)");
    phantom->add_option("--out", ph.out, "Output directory")->capture_default_str();
    phantom->add_option("--seed", ph.seed, "Phantom seed")->capture_default_str();
    phantom->add_option("--size", ph.size, "Voxels per axis")->check(CLI::Range(16, 512))->capture_default_str();
    phantom->add_option("--spacing", ph.spacing, "Voxel size in mm")->check(CLI::PositiveNumber)->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_code::kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_code::kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (e.get_exit_code() == 0)
            return exit_code::kOk;
        err << "run with --help for usage\n";
        return exit_code::kUsage;
    }

    try {
        if (*generate)
            return cmd_generate(gen, *generate, out);
        if (*evaluate)
            return cmd_evaluate(ev, out);
        if (*fit_cmd)
            return cmd_fit_adapter(fit, out);
        if (*apply_cmd)
            return cmd_apply_adapter(app_args, out);
        if (*metrics)
            return cmd_metrics(met, out);
        if (*corrupt_cmd)
            return cmd_corrupt(cor, *corrupt_cmd, out);
        if (*phantom)
            return cmd_phantom(ph, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_for(e.code());
    } catch (const Json::exception& e) {
        err << "error: malformed JSON: " << e.what() << "\n";
        return exit_code::kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::kFailure;
    }
    return exit_code::kUsage;
}

int run_cli(int argc, char** argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

} // namespace brainid
