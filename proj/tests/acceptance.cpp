// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "brainid/adaptation.hpp"
#include "brainid/corruption.hpp"
#include "brainid/generator.hpp"
#include "brainid/metrics.hpp"
#include "brainid/nifti.hpp"
#include "brainid/phantom.hpp"
#include "brainid/serialization.hpp"
#include "support.hpp"

using namespace brainid;
namespace fs = std::filesystem;
using testing_support::random_volume;

namespace tol {
constexpr double kGenerateSeconds = 30.0;
constexpr double kInverseMeanVoxels = 0.2;
constexpr double kInverseMaxVoxels = 1.0;
constexpr int kInverseMargin = 8;
constexpr double kTranslationRelative = 1e-4;
constexpr double kContrastStdRelative = 0.10;
constexpr double kContrastMeanOfRange = 0.02;
constexpr std::size_t kContrastMinRegion = 10000;
constexpr double kPsnrGapDb = 1.0;
constexpr double kNormL2 = 1e-9;
constexpr double kSsimOracle = 1e-6;
constexpr double kLossRelative = 1e-6;
constexpr double kAdapterCoefficient = 1e-4;
constexpr double kAdapterResidualL1 = 1e-6;
constexpr double kProtocolSsim = 0.95;
constexpr double kGeometry = 1e-5;
} // namespace tol

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& criterion)
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        o = criterion();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %2d %-34s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<std::uint8_t> bytes_of(const fs::path& p) { return nifti::read_file(p); }

const fs::path& scratch()
{
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "brainid_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// ---------------------------------------------------------------------------------------

Outcome determinism()
{
    const fs::path dir = scratch() / "determinism";
    fs::create_directories(dir);
    const SubjectRecord s = make_phantom(7, {64, 64, 64});
    nifti::save(dir / "labels.nii", nifti::write_nifti(s.labels));
    nifti::save(dir / "mprage.nii", nifti::write_nifti(s.mprage));

    double slowest = 0.0;
    auto run = [&](const std::string& threads, const std::string& out) {
        const std::string cmd = "BRAINID_THREADS=" + threads + " '" BRAINID_TOOL_PATH "' generate '" +
                                (dir / "labels.nii").string() + "' '" + (dir / "mprage.nii").string() +
                                "' --n 4 --seed 7 --out '" + (dir / out).string() + "' > /dev/null";
        const auto t0 = std::chrono::steady_clock::now();
        const int rc = std::system(cmd.c_str());
        slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        return rc;
    };
    if (run("8", "a") != 0 || run("8", "b") != 0 || run("1", "c") != 0)
        return {false, "generate exited non-zero"};

    int files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        const auto name = entry.path().filename();
        const auto ref = bytes_of(entry.path());
        if (ref != bytes_of(dir / "b" / name) || ref != bytes_of(dir / "c" / name))
            return {false, "output differs: " + name.string()};
        ++files;
    }
    const bool pass = files == 8 && slowest < tol::kGenerateSeconds;
    return {pass, fmt("%d files identical over 2 runs x {8,1} threads; slowest run %.2fs (limit %.0fs)", files,
                      slowest, tol::kGenerateSeconds)};
}

Outcome inverse_consistency()
{
    const Geometry g = Geometry::isotropic({64, 64, 64});
    const DeformationConfig cfg = SeverityConfig::preset(Level::Mild).deformation;
    double mean_sum = 0.0, worst_mean = 0.0, worst_max = 0.0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(2024, "inverse", static_cast<std::uint64_t>(t)));
        const DeformationField phi = generate_deformation(rng, cfg, g, static_cast<std::uint64_t>(t));
        const auto r = testing_support::composition_residual(phi, invert(phi), tol::kInverseMargin);
        if (r.count == 0)
            return {false, fmt("trial %d: empty interior", t)};
        mean_sum += r.mean;
        worst_mean = std::max(worst_mean, r.mean);
        worst_max = std::max(worst_max, r.max);
    }
    const double mean = mean_sum / trials;
    const bool pass = worst_mean <= tol::kInverseMeanVoxels && worst_max <= tol::kInverseMaxVoxels;
    return {pass, fmt("50 fields: mean %.4f vox (worst field %.4f, limit %.1f), max %.4f vox (limit %.1f)", mean,
                      worst_mean, tol::kInverseMeanVoxels, worst_max, tol::kInverseMaxVoxels)};
}

Outcome svf_correctness()
{
    const Geometry g = Geometry::isotropic({48, 40, 32}, 1.25);
    double worst_rel = 0.0;
    for (const Vec3& c : {Vec3(2.0, -1.0, 0.5), Vec3(0.0, 0.0, 7.5), Vec3(-3.2, 4.1, -0.9)}) {
        const DeformationField f = integrate_svf(SVF::constant(g, c), 7);
        for (std::size_t i = 0; i < g.voxel_count(); ++i)
            worst_rel = std::max(worst_rel, (f.displacement_at(i) - c).norm() / c.norm());
    }
    double zero_max = 0.0;
    const DeformationField z = integrate_svf(SVF::zero(g), 7);
    for (std::size_t i = 0; i < g.voxel_count(); ++i)
        zero_max = std::max(zero_max, z.displacement_at(i).norm());
    const bool pass = worst_rel <= tol::kTranslationRelative && zero_max == 0.0;
    return {pass, fmt("constant field relative error %.2e (limit %.0e); zero field max |u| = %g", worst_rel,
                      tol::kTranslationRelative, zero_max)};
}

Outcome contrast_statistics()
{
    const SubjectRecord s = make_phantom(11, {64, 64, 64});
    std::map<std::int32_t, std::size_t> sizes;
    for (std::int32_t l : s.labels.data())
        ++sizes[l];
    int regions = 0, failed = 0;
    double worst_std = 0.0, worst_mean = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(derive_seed(77, "contrast", seed));
        const ContrastParams p = sample_contrast_params(rng, s.labels.label_set(), {});
        const Volume raw = paint_raw(s.labels, p, rng);
        double lo = raw[0], hi = raw[0];
        for (double v : raw.data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = hi - lo;
        for (const auto& [label, n] : sizes) {
            if (label == 0 || n < tol::kContrastMinRegion)
                continue;
            double sum = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < raw.size(); ++i)
                if (s.labels[i] == label)
                    sum += raw[i];
            const double mean = sum / n;
            for (std::size_t i = 0; i < raw.size(); ++i)
                if (s.labels[i] == label)
                    sq += (raw[i] - mean) * (raw[i] - mean);
            const double sd = std::sqrt(sq / (n - 1));
            const LabelContrast want = p.labels.at(label);
            const double std_err = std::abs(sd - want.std) / want.std;
            const double mean_err = std::abs(mean - want.mean) / range;
            worst_std = std::max(worst_std, std_err);
            worst_mean = std::max(worst_mean, mean_err);
            failed += (std_err > tol::kContrastStdRelative || mean_err > tol::kContrastMeanOfRange) ? 1 : 0;
            ++regions;
        }
    }
    return {failed == 0 && regions > 0,
            fmt("%d regions >= 1e4 voxels over 20 seeds: worst std error %.2f%% (limit 10%%), worst mean error %.3f%% "
                "of range (limit 2%%)",
                regions, 100 * worst_std, 100 * worst_mean)};
}

Outcome severity_ordering()
{
    const SubjectRecord s = make_phantom(12, {48, 48, 48});
    double psnr_sum[4] = {0, 0, 0, 0};
    const int seeds = 50;
    for (int t = 0; t < seeds; ++t) {
        Rng rng(derive_seed(99, "severity", static_cast<std::uint64_t>(t)));
        const ContrastParams p = sample_contrast_params(rng, s.labels.label_set(), {});
        const Volume clean = paint(s.labels, p, rng);
        const std::uint64_t corruption_seed = rng();
        for (Level l : {Level::Mild, Level::Medium, Level::Severe}) {
            Rng crng(corruption_seed);
            psnr_sum[static_cast<int>(l)] += psnr(corrupt(clean, crng, SeverityConfig::preset(l)).first, clean);
        }
    }
    const double mild = psnr_sum[1] / seeds, medium = psnr_sum[2] / seeds, severe = psnr_sum[3] / seeds;
    const bool pass = mild - medium >= tol::kPsnrGapDb && medium - severe >= tol::kPsnrGapDb;
    return {pass, fmt("mean PSNR mild %.2f dB > medium %.2f dB > severe %.2f dB; gaps %.2f / %.2f dB (min %.0f)", mild,
                      medium, severe, mild - medium, medium - severe, tol::kPsnrGapDb)};
}

Outcome norm_l2()
{
    const Geometry g = Geometry::isotropic({16, 16, 16});
    double scale_worst = 0.0;
    for (double c : {0.5, 1.0, 2.0}) {
        const Volume truth = random_volume(g, 5, 0.5, 1.5);
        Volume est = truth;
        for (auto& x : est.data())
            x *= c;
        scale_worst = std::max(scale_worst, norm_l2_bias(est, truth));
    }
    double oracle_worst = 0.0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        const Volume est = random_volume(g, 1000 + t, 0.1, 2.0);
        const Volume truth = random_volume(g, 5000 + t, 0.1, 2.0);
        long double te = 0, ee = 0, tt = 0;
        for (std::size_t i = 0; i < est.size(); ++i) {
            te += static_cast<long double>(truth[i]) * est[i];
            ee += static_cast<long double>(est[i]) * est[i];
            tt += static_cast<long double>(truth[i]) * truth[i];
        }
        const long double w = te / ee;
        long double num = 0;
        for (std::size_t i = 0; i < est.size(); ++i)
            num += (w * est[i] - truth[i]) * (w * est[i] - truth[i]);
        const double direct = static_cast<double>(std::sqrt(num / tt));
        oracle_worst = std::max(oracle_worst, std::abs(norm_l2_bias(est, truth) - direct));
    }
    const bool pass = scale_worst <= tol::kNormL2 && oracle_worst <= tol::kNormL2;
    return {pass, fmt("scaled copies max %.2e; 100 random pairs max |diff| %.2e (limit %.0e)", scale_worst,
                      oracle_worst, tol::kNormL2)};
}

Outcome ssim_oracle()
{
    const Geometry g = Geometry::isotropic({8, 8, 8});
    double worst_ssim = 0.0, worst_ms = 0.0;
    bool self_exact = true;
    for (std::uint64_t t = 0; t < 20; ++t) {
        const Volume a = random_volume(g, 300 + t);
        Volume b = random_volume(g, 400 + t);
        for (std::size_t i = 0; i < b.size(); ++i)
            b[i] = 0.6 * a[i] + 0.4 * b[i];
        const double brute = testing_support::brute_force_ssim(a, b);
        worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - brute));
        worst_ms = std::max(worst_ms, std::abs(ms_ssim(a, b, 1) - brute));
        self_exact = self_exact && ssim(a, a) == 1.0 && ms_ssim(a, a, 1) == 1.0;
    }
    const bool pass = worst_ssim <= tol::kSsimOracle && worst_ms <= tol::kSsimOracle && self_exact;
    return {pass, fmt("8^3 brute force: SSIM max diff %.2e, MS-SSIM max diff %.2e (limit %.0e); self-similarity %s",
                      worst_ssim, worst_ms, tol::kSsimOracle, self_exact ? "exactly 1" : "NOT 1")};
}

Outcome anatomy_loss()
{
    const Geometry g = Geometry::isotropic({8, 7, 6});
    double worst_rel = 0.0;
    bool zero_iff_equal = true;
    for (std::uint64_t t = 0; t < 20; ++t) {
        const Volume target = random_volume(g, 700 + t);
        std::vector<Volume> preds;
        for (std::uint64_t i = 0; i < 4; ++i)
            preds.push_back(random_volume(g, 800 + 10 * t + i));
        const double lambda = 0.5 + 0.1 * t;
        double naive = 0.0;
        const double n = static_cast<double>(target.size());
        for (const Volume& p : preds) {
            double term = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i)
                term += std::abs(p[i] - target[i]) / n;
            for (int axis = 0; axis < 3; ++axis)
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const auto c = g.coords(i);
                    auto at = [&](const Volume& v, int off) {
                        auto q = c;
                        q[axis] += off;
                        return v.at(q[0], q[1], q[2]);
                    };
                    const int idx = c[axis], last = g.dims[axis] - 1;
                    const int lo = idx > 0 ? -1 : 0, hi = idx < last ? 1 : 0;
                    const double h = static_cast<double>(hi - lo);
                    const double gp = (at(p, hi) - at(p, lo)) / h, gt = (at(target, hi) - at(target, lo)) / h;
                    term += lambda * std::abs(gp - gt) / n;
                }
            naive += term;
        }
        worst_rel = std::max(worst_rel, std::abs(batch_loss(target, preds, lambda) - naive) / naive);
        zero_iff_equal = zero_iff_equal && batch_loss(target, {target, target, target, target}, lambda) == 0.0;
        Volume nudged = target;
        nudged[t] += 1e-9;
        zero_iff_equal = zero_iff_equal && batch_loss(target, {target, nudged, target, target}, lambda) > 0.0;
    }
    const bool pass = worst_rel <= tol::kLossRelative && zero_iff_equal;
    return {pass, fmt("20 random 4-sample batches: max relative diff %.2e (limit %.0e); zero iff equal: %s", worst_rel,
                      tol::kLossRelative, zero_iff_equal ? "yes" : "no")};
}

Outcome adapter_recovery()
{
    const Geometry g = Geometry::isotropic({32, 32, 32});
    std::mt19937_64 rng(123);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Volume> ch;
    for (int c = 0; c < 64; ++c)
        ch.push_back(random_volume(g, 9000 + c, -1.0, 1.0));
    const VolumeStack features(ch);
    Eigen::VectorXd w(64);
    for (auto& x : w)
        x = normal(rng);
    const double b = 0.37;
    Volume target(g, b);
    for (int c = 0; c < 64; ++c)
        for (std::size_t i = 0; i < target.size(); ++i)
            target[i] += w[c] * ch[c][i];
    const LinearAdapter a = fit_adapter(features, VolumeStack({target}), nullptr, 0.0);
    const double coef_err = std::max((a.weights.col(0) - w).cwiseAbs().maxCoeff(), std::abs(a.bias[0] - b));
    const double resid = adapter_residual(a, features, VolumeStack({target})).l1;

    // Concatenated-input mode: the target depends on the input image with a planted coefficient.
    const Volume input = random_volume(g, 31337, 0.0, 1.0);
    const double w_input = -1.75;
    Volume target2 = target;
    for (std::size_t i = 0; i < target2.size(); ++i)
        target2[i] += w_input * input[i];
    const LinearAdapter ac = fit_adapter(features, VolumeStack({target2}), &input, 0.0);
    double concat_err = std::abs(ac.weights(64, 0) - w_input);
    concat_err = std::max(concat_err, (ac.weights.col(0).head(64) - w).cwiseAbs().maxCoeff());
    concat_err = std::max(concat_err, std::abs(ac.bias[0] - b));

    const bool pass = coef_err <= tol::kAdapterCoefficient && resid <= tol::kAdapterResidualL1 &&
                      concat_err <= tol::kAdapterCoefficient;
    return {pass, fmt("64->1 on 32^3: coefficient error %.2e, residual L1 %.2e; concat coefficient error %.2e", coef_err,
                      resid, concat_err)};
}

Outcome robustness_protocol_proxy()
{
    const SubjectRecord s = make_phantom(21, {64, 64, 64});
    const Volume reference = minmax_normalize(s.mprage);
    std::vector<Candidate> candidates;
    for (std::uint64_t t = 0; t < 10; ++t) {
        Rng rng(derive_seed(555, "protocol", t));
        const SeverityConfig mild = SeverityConfig::preset(Level::Mild);
        const DeformationField phi = generate_deformation(rng, mild.deformation, s.labels.geometry(), t);
        const Volume warped = warp_volume(reference, phi);
        const Volume corrupted = corrupt(warped, rng, mild).first;
        candidates.push_back({VolumeStack({corrupted}), phi});
    }
    const auto mask = eroded_foreground(s.labels, 2);
    const MetricReport r = robustness_protocol(VolumeStack({reference}), candidates, RobustnessMode::Intra, mask);
    const MetricSummary& ss = r.metric("SSIM");
    const double worst = *std::min_element(ss.values.begin(), ss.values.end());
    return {worst >= tol::kProtocolSsim,
            fmt("10 mild samples: SSIM mean %.4f, min %.4f (limit %.2f); L1 mean %.4f; MS-SSIM mean %.4f", ss.mean, worst,
                tol::kProtocolSsim, r.metric("L1").mean, r.metric("MS-SSIM").mean)};
}

Outcome nifti_round_trip()
{
    std::mt19937_64 rng(4242);
    std::uniform_int_distribution<int> dim(1, 24);
    std::uniform_real_distribution<double> sp(0.3, 4.0), off(-100.0, 100.0);
    int exact = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        Geometry g = Geometry::isotropic({dim(rng), dim(rng), dim(rng)});
        for (int a = 0; a < 3; ++a) {
            g.spacing[a] = static_cast<float>(sp(rng));
            g.grid_to_world(a, a) = g.spacing[a];
            g.grid_to_world(a, 3) = static_cast<float>(off(rng));
        }
        Volume v = random_volume(g, 6000 + t, -1e3, 1e3);
        for (auto& x : v.data())
            x = static_cast<float>(x);
        const Volume back = nifti::read_volume(nifti::write_nifti(v));
        if (back.size() == v.size() && std::memcmp(back.data().data(), v.data().data(), v.size() * sizeof(double)) == 0 &&
            same_geometry(back.geometry(), g))
            ++exact;
    }

    // Third-party check: nibabel must see the geometry we wrote.
    const fs::path dir = scratch() / "nifti";
    fs::create_directories(dir);
    Geometry g = Geometry::isotropic({20, 24, 16});
    g.spacing = {1.0, 1.5, 3.0};
    g.grid_to_world << 1.0, 0, 0, -12.0, 0, 1.5, 0, 8.5, 0, 0, 3.0, 30.0, 0, 0, 0, 1;
    const Volume vol = random_volume(g, 1);
    Rng drng(3);
    const DeformationField phi = generate_deformation(drng, {}, g, 3);
    nifti::save(dir / "volume.nii", nifti::write_nifti(vol));
    nifti::save(dir / "labels.nii", nifti::write_nifti(make_phantom(1, {20, 24, 16}).labels.retagged(g)));
    nifti::save(dir / "deformation.nii", nifti::write_nifti(phi.displacement(), nifti::StackLayout::Vector));
    nifti::save(dir / "volume.nii.gz", nifti::write_nifti(vol));

    // Outputs of the CLI run from criterion 1, when present, are checked as well.
    std::vector<std::pair<fs::path, Geometry>> expected{{dir / "volume.nii", g},
                                                         {dir / "labels.nii", g},
                                                         {dir / "deformation.nii", g},
                                                         {dir / "volume.nii.gz", g}};
    const fs::path generated = scratch() / "determinism" / "a";
    if (fs::exists(generated)) {
        const Geometry gen = make_phantom(7, {64, 64, 64}).labels.geometry();
        for (const char* name : {"sample_000.nii", "target.nii", "labels_warped.nii", "deformation.nii"})
            expected.emplace_back(generated / name, gen);
    }
    const fs::path dump = dir / "dump.json";
    std::string cmd = std::string("'") + BRAINID_PYTHON + "' '" + BRAINID_HEADER_DUMP + "'";
    for (const auto& [path, geometry] : expected)
        cmd += " '" + path.string() + "'";
    cmd += " > '" + dump.string() + "'";
    if (std::system(cmd.c_str()) != 0)
        return {false, fmt("%d/100 bit-exact; nibabel header dump failed to run", exact)};
    const Json files = Json::parse(std::ifstream(dump));
    bool geometry_ok = files.size() == expected.size();
    for (std::size_t f = 0; geometry_ok && f < files.size(); ++f) {
        const Geometry& want = expected[f].second;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                geometry_ok = geometry_ok &&
                              std::abs(files[f]["affine"][r][c].get<double>() - want.grid_to_world(r, c)) <= tol::kGeometry;
        for (int a = 0; a < 3; ++a) {
            geometry_ok = geometry_ok && files[f]["shape"][a] == want.dims[a];
            geometry_ok = geometry_ok && std::abs(files[f]["zooms"][a].get<double>() - want.spacing[a]) <= tol::kGeometry;
        }
        if (expected[f].first.filename() == "deformation.nii")
            geometry_ok = geometry_ok && files[f]["intent_code"] == 1007 && files[f]["shape"].size() == 5 &&
                          files[f]["shape"][4] == 3;
    }
    geometry_ok = geometry_ok && files[0]["datatype"] == 16 && files[1]["datatype"] == 4;
    return {exact == 100 && geometry_ok,
            fmt("%d/100 random volumes bit-exact (float32); nibabel geometry/shape/intent check on %zu files %s", exact,
                expected.size(), geometry_ok ? "matches" : "MISMATCH")};
}

} // namespace

int main()
{
    std::printf("brainid acceptance suite\n");
    report(1, "determinism", determinism);
    report(2, "deformation inverse-consistency", inverse_consistency);
    report(3, "SVF correctness", svf_correctness);
    report(4, "contrast statistics", contrast_statistics);
    report(5, "severity ordering (PSNR)", severity_ordering);
    report(6, "normL2", norm_l2);
    report(7, "SSIM/MS-SSIM oracle equivalence", ssim_oracle);
    report(8, "anatomy loss", anatomy_loss);
    report(9, "adapter recovery", adapter_recovery);
    report(10, "robustness protocol (proxy)", robustness_protocol_proxy);
    report(11, "NIfTI round trip", nifti_round_trip);
    std::printf("%d of 11 criteria failed\n", failures);
    fs::remove_all(scratch());
    return failures == 0 ? 0 : 1;
}
