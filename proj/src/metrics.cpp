#include "brainid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>

#include "brainid/error.hpp"
#include "brainid/parallel.hpp"

namespace brainid {

namespace {

void check_mask(Mask mask, std::size_t n)
{
    if (mask.empty())
        return;
    if (mask.size() != n)
        throw Error(ErrorCode::GeometryMismatch, "mask size differs from the volume size");
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
        throw Error(ErrorCode::EmptyMask, "mask selects no voxels");
}

inline bool in_mask(Mask mask, std::size_t i) { return mask.empty() || mask[i] != 0; }

// 3D summed-area table with a zero border: S(i,j,k) = sum over [0,i) x [0,j) x [0,k).
class Integral {
public:
    Integral(const Geometry& g, const std::function<double(std::size_t)>& value)
        : nx_(g.dims[0] + 1), ny_(g.dims[1] + 1), nz_(g.dims[2] + 1),
          s_(static_cast<std::size_t>(nx_) * ny_ * nz_, 0.0)
    {
        for (int k = 1; k < nz_; ++k)
            for (int j = 1; j < ny_; ++j)
                for (int i = 1; i < nx_; ++i)
                    s_[at(i, j, k)] = value(g.index(i - 1, j - 1, k - 1)) + s_[at(i - 1, j, k)] + s_[at(i, j - 1, k)] +
                                      s_[at(i, j, k - 1)] - s_[at(i - 1, j - 1, k)] - s_[at(i - 1, j, k - 1)] -
                                      s_[at(i, j - 1, k - 1)] + s_[at(i - 1, j - 1, k - 1)];
    }

    // Sum over the box [x0, x1) x [y0, y1) x [z0, z1).
    double box(int x0, int y0, int z0, int x1, int y1, int z1) const
    {
        return s_[at(x1, y1, z1)] - s_[at(x0, y1, z1)] - s_[at(x1, y0, z1)] - s_[at(x1, y1, z0)] +
               s_[at(x0, y0, z1)] + s_[at(x0, y1, z0)] + s_[at(x1, y0, z0)] - s_[at(x0, y0, z0)];
    }

private:
    std::size_t at(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx_) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny_) * k);
    }
    int nx_, ny_, nz_;
    std::vector<double> s_;
};

struct SsimMeans {
    double ssim = 0.0;
    double cs = 0.0;
};

SsimMeans ssim_means(const Volume& a, const Volume& b, const SsimOptions& opts, Mask mask)
{
    require_same_geometry(a.geometry(), b.geometry(), "ssim: volumes live on different grids");
    const Geometry& g = a.geometry();
    const int w = opts.window;
    if (w < 1)
        throw Error(ErrorCode::InvalidArgument, "SSIM window must be positive");
    for (int ax = 0; ax < 3; ++ax)
        if (g.dims[ax] < w)
            throw Error(ErrorCode::TooSmallForScales, "volume dim " + std::to_string(g.dims[ax]) +
                                                          " is smaller than the SSIM window " + std::to_string(w));
    if (!mask.empty() && mask.size() != g.voxel_count())
        throw Error(ErrorCode::GeometryMismatch, "mask size differs from the volume size");

    const Integral sa(g, [&](std::size_t i) { return a[i]; });
    const Integral sb(g, [&](std::size_t i) { return b[i]; });
    const Integral saa(g, [&](std::size_t i) { return a[i] * a[i]; });
    const Integral sbb(g, [&](std::size_t i) { return b[i] * b[i]; });
    const Integral sab(g, [&](std::size_t i) { return a[i] * b[i]; });

    const double c1 = std::pow(opts.k1 * opts.dynamic_range, 2);
    const double c2 = std::pow(opts.k2 * opts.dynamic_range, 2);
    const double count = static_cast<double>(w) * w * w;
    const int lo = (w - 1) / 2;    // window offset before the centre
    const int hi = w - 1 - lo;     // and after

    double sum_ssim = 0.0, sum_cs = 0.0;
    std::size_t centres = 0;
    for (int k = lo; k < g.dims[2] - hi; ++k)
        for (int j = lo; j < g.dims[1] - hi; ++j)
            for (int i = lo; i < g.dims[0] - hi; ++i) {
                if (!in_mask(mask, g.index(i, j, k)))
                    continue;
                const int x0 = i - lo, y0 = j - lo, z0 = k - lo;
                const int x1 = x0 + w, y1 = y0 + w, z1 = z0 + w;
                const double mu_a = sa.box(x0, y0, z0, x1, y1, z1) / count;
                const double mu_b = sb.box(x0, y0, z0, x1, y1, z1) / count;
                const double var_a = saa.box(x0, y0, z0, x1, y1, z1) / count - mu_a * mu_a;
                const double var_b = sbb.box(x0, y0, z0, x1, y1, z1) / count - mu_b * mu_b;
                const double cov = sab.box(x0, y0, z0, x1, y1, z1) / count - mu_a * mu_b;
                const double cs = (2.0 * cov + c2) / (var_a + var_b + c2);
                const double lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
                sum_ssim += lum * cs;
                sum_cs += cs;
                ++centres;
            }
    if (centres == 0)
        throw Error(ErrorCode::EmptyMask, "no SSIM window centre falls inside the mask");
    return {sum_ssim / centres, sum_cs / centres};
}

std::vector<std::uint8_t> downsample_mask(Mask mask, const Geometry& fine, const Geometry& coarse)
{
    std::vector<std::uint8_t> out(coarse.voxel_count(), 0);
    for (int k = 0; k < coarse.dims[2]; ++k)
        for (int j = 0; j < coarse.dims[1]; ++j)
            for (int i = 0; i < coarse.dims[0]; ++i) {
                std::uint8_t any = 0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            any |= mask[fine.index(2 * i + dx, 2 * j + dy, 2 * k + dz)] != 0 ? 1 : 0;
                out[coarse.index(i, j, k)] = any;
            }
    return out;
}

} // namespace

double l1(const Volume& a, const Volume& b, Mask mask)
{
    require_same_geometry(a.geometry(), b.geometry(), "l1: volumes live on different grids");
    check_mask(mask, a.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!in_mask(mask, i))
            continue;
        sum += std::abs(a[i] - b[i]);
        ++n;
    }
    return sum / static_cast<double>(n);
}

double psnr(const Volume& pred, const Volume& ref, double peak, Mask mask)
{
    require_same_geometry(pred.geometry(), ref.geometry(), "psnr: volumes live on different grids");
    check_mask(mask, pred.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!in_mask(mask, i))
            continue;
        const double d = pred[i] - ref[i];
        sum += d * d;
        ++n;
    }
    const double mse = sum / static_cast<double>(n);
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Volume& a, const Volume& b, const SsimOptions& opts, Mask mask)
{
    return ssim_means(a, b, opts, mask).ssim;
}

Volume downsample2(const Volume& v)
{
    const Geometry& g = v.geometry();
    Geometry out_g = g;
    for (int a = 0; a < 3; ++a) {
        out_g.dims[a] = std::max(1, g.dims[a] / 2);
        out_g.spacing[a] = g.spacing[a] * 2.0;
        out_g.grid_to_world.col(a) = g.grid_to_world.col(a) * 2.0;
    }
    Volume out(out_g);
    for (int k = 0; k < out_g.dims[2]; ++k)
        for (int j = 0; j < out_g.dims[1]; ++j)
            for (int i = 0; i < out_g.dims[0]; ++i) {
                double sum = 0.0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            sum += v.at(std::min(2 * i + dx, g.dims[0] - 1), std::min(2 * j + dy, g.dims[1] - 1),
                                        std::min(2 * k + dz, g.dims[2] - 1));
                out.at(i, j, k) = sum / 8.0;
            }
    return out;
}

double ms_ssim(const Volume& a, const Volume& b, int scales, const SsimOptions& opts, Mask mask)
{
    static constexpr double kWeights[] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    if (scales < 1 || scales > 5)
        throw Error(ErrorCode::InvalidArgument, "MS-SSIM supports 1 to 5 scales");
    require_same_geometry(a.geometry(), b.geometry(), "ms_ssim: volumes live on different grids");
    const int need = opts.window << (scales - 1);
    for (int ax = 0; ax < 3; ++ax)
        if (a.dims()[ax] < need)
            throw Error(ErrorCode::TooSmallForScales, "dim " + std::to_string(a.dims()[ax]) + " < window * 2^(scales-1) = " +
                                                          std::to_string(need));

    double weight_sum = 0.0;
    for (int s = 0; s < scales; ++s)
        weight_sum += kWeights[s];

    Volume x = a, y = b;
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    double result = 1.0;
    for (int s = 0; s < scales; ++s) {
        const double w = kWeights[s] / weight_sum;
        const SsimMeans means = ssim_means(x, y, opts, m);
        if (s == scales - 1) {
            result *= std::pow(std::max(means.ssim, 0.0), w);
        } else {
            result *= std::pow(std::max(means.cs, 0.0), w);
            Volume nx = downsample2(x);
            if (!m.empty())
                m = downsample_mask(m, x.geometry(), nx.geometry());
            x = std::move(nx);
            y = downsample2(y);
        }
    }
    return result;
}

DiceResult dice(const LabelMap& pred, const LabelMap& ref, const std::vector<std::int32_t>& labels)
{
    require_same_geometry(pred.geometry(), ref.geometry(), "dice: label maps live on different grids");
    std::vector<std::int32_t> wanted = labels;
    if (wanted.empty()) {
        std::set<std::int32_t> all(pred.label_set().begin(), pred.label_set().end());
        all.insert(ref.label_set().begin(), ref.label_set().end());
        all.erase(0);
        wanted.assign(all.begin(), all.end());
    }
    std::map<std::int32_t, std::size_t> p_count, r_count, both;
    for (std::int32_t l : wanted)
        p_count[l] = r_count[l] = both[l] = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::int32_t p = pred[i], r = ref[i];
        if (auto it = p_count.find(p); it != p_count.end())
            ++it->second;
        if (auto it = r_count.find(r); it != r_count.end())
            ++it->second;
        if (p == r)
            if (auto it = both.find(p); it != both.end())
                ++it->second;
    }
    DiceResult out;
    double sum = 0.0;
    for (std::int32_t l : wanted) {
        const std::size_t denom = p_count[l] + r_count[l];
        if (denom == 0)
            continue;
        const double d = 2.0 * static_cast<double>(both[l]) / static_cast<double>(denom);
        out.per_label[l] = d;
        sum += d;
    }
    out.mean = out.per_label.empty() ? 0.0 : sum / static_cast<double>(out.per_label.size());
    return out;
}

double norm_l2_bias(const Volume& estimate, const Volume& truth, Mask mask)
{
    require_same_geometry(estimate.geometry(), truth.geometry(), "norm_l2_bias: fields live on different grids");
    check_mask(mask, estimate.size());
    double te = 0.0, ee = 0.0, tt = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        if (!in_mask(mask, i))
            continue;
        te += truth[i] * estimate[i];
        ee += estimate[i] * estimate[i];
        tt += truth[i] * truth[i];
    }
    if (!(ee > 0.0))
        throw Error(ErrorCode::ZeroEstimate, "estimated bias field is zero on the mask");
    if (!(tt > 0.0))
        throw Error(ErrorCode::ZeroEstimate, "true bias field is zero on the mask");
    const double w = te / ee;
    double err = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        if (!in_mask(mask, i))
            continue;
        const double d = w * estimate[i] - truth[i];
        err += d * d;
    }
    return std::sqrt(err / tt);
}

VolumeStack canonical_features(const VolumeStack& features, const DeformationField& phi)
{
    const DeformationField inverse = invert(phi);
    std::vector<Volume> out;
    out.reserve(features.channel_count());
    for (const auto& ch : features.channels())
        out.push_back(warp_volume(ch, inverse));
    return VolumeStack(std::move(out));
}

VolumeStack atlas_features(const VolumeStack& features, const DeformationField& psi, const std::optional<Geometry>& atlas)
{
    if (atlas) {
        const Geometry& g = psi.geometry();
        bool ok = g.dims == atlas->dims;
        for (int a = 0; a < 3 && ok; ++a)
            ok = std::abs(g.spacing[a] - atlas->spacing[a]) <= 1e-6;
        if (!ok)
            throw Error(ErrorCode::GeometryMismatch, "atlas map grid differs from the atlas grid");
    }
    const Geometry target = atlas ? *atlas : psi.geometry();
    std::vector<Volume> out;
    out.reserve(features.channel_count());
    for (const auto& ch : features.channels())
        out.push_back(resample_through(ch, psi).retagged(target));
    return VolumeStack(std::move(out));
}

const MetricSummary& MetricReport::metric(const std::string& name) const
{
    for (const auto& m : metrics)
        if (m.name == name)
            return m;
    throw Error(ErrorCode::InvalidArgument, "report has no metric '" + name + "'");
}

MetricSummary summarize(std::string name, std::vector<double> values)
{
    MetricSummary s;
    s.name = std::move(name);
    s.values = std::move(values);
    if (s.values.empty())
        return s;
    double sum = 0.0;
    for (double v : s.values)
        sum += v;
    s.mean = sum / static_cast<double>(s.values.size());
    double var = 0.0;
    for (double v : s.values)
        var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / static_cast<double>(s.values.size()));
    return s;
}

MetricReport robustness_protocol(const VolumeStack& reference, const std::vector<Candidate>& candidates,
                                 RobustnessMode mode, Mask mask, int ms_ssim_scales)
{
    MetricReport report;
    report.mode = mode;
    report.candidates = candidates.size();
    report.channels = reference.channel_count();
    report.masked = !mask.empty();
    if (candidates.empty())
        throw Error(ErrorCode::InvalidArgument, "robustness protocol needs at least one candidate");
    for (std::size_t c = 0; c < candidates.size(); ++c)
        if (candidates[c].features.channel_count() != reference.channel_count())
            throw Error(ErrorCode::ChannelMismatch, "candidate " + std::to_string(c) + " has " +
                                                        std::to_string(candidates[c].features.channel_count()) +
                                                        " channels, reference has " +
                                                        std::to_string(reference.channel_count()));

    const std::size_t channels = reference.channel_count();
    const std::size_t pairs = candidates.size() * channels;
    std::vector<double> l1s(pairs), ssims(pairs), msssims(pairs);
    // Aligning candidates is the expensive part; pairs are filled by index so order is fixed.
    parallel_for(candidates.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            const VolumeStack aligned = mode == RobustnessMode::Intra
                                            ? canonical_features(candidates[c].features, candidates[c].field)
                                            : atlas_features(candidates[c].features, candidates[c].field);
            for (std::size_t ch = 0; ch < channels; ++ch) {
                const Volume& ref = reference[ch];
                const Volume cand = aligned[ch].retagged(ref.geometry());
                const std::size_t at = c * channels + ch;
                l1s[at] = l1(cand, ref, mask);
                ssims[at] = ssim(cand, ref, {}, mask);
                msssims[at] = ms_ssim(cand, ref, ms_ssim_scales, {}, mask);
            }
        }
    });
    report.metrics.push_back(summarize("L1", std::move(l1s)));
    report.metrics.push_back(summarize("SSIM", std::move(ssims)));
    report.metrics.push_back(summarize("MS-SSIM", std::move(msssims)));
    return report;
}

std::string format_report_table(const MetricReport& report)
{
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-8s %-20s %-20s %-20s\n", "Mode", "L1", "SSIM", "MS-SSIM");
    out += line;
    auto cell = [](const MetricSummary& m) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f (%.6f)", m.mean, m.std);
        return std::string(buf);
    };
    std::snprintf(line, sizeof(line), "%-8s %-20s %-20s %-20s\n", report.mode == RobustnessMode::Intra ? "Intra" : "Inter",
                  cell(report.metric("L1")).c_str(), cell(report.metric("SSIM")).c_str(),
                  cell(report.metric("MS-SSIM")).c_str());
    out += line;
    return out;
}

} // namespace brainid
