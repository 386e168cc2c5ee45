#include "brainid/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brainid/error.hpp"
#include "brainid/parallel.hpp"

namespace brainid {

namespace {

// Per-voxel design row accessor: feature channels, then the optional input image.
struct Design {
    const VolumeStack& features;
    const Volume* input;

    std::size_t cols() const { return features.channel_count() + (input ? 1 : 0); }
    double operator()(std::size_t voxel, std::size_t col) const
    {
        return col < features.channel_count() ? features[col][voxel] : (*input)[voxel];
    }
};

void check_design(const VolumeStack& features, const Volume* input)
{
    if (input)
        require_same_geometry(features.geometry(), input->geometry(), "adapter: concatenated input grid differs");
}

// Sums f(chunk_begin, chunk_end, partial) over fixed chunks, reduced in chunk order.
template <typename Acc, typename F>
Acc chunked_sum(std::size_t n, const Acc& zero, F&& f)
{
    const std::size_t chunks = chunk_count(n);
    std::vector<Acc> partial(chunks, zero);
    parallel_for(chunks, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c)
            f(c * kReductionChunk, std::min(n, (c + 1) * kReductionChunk), partial[c]);
    });
    Acc total = zero;
    for (const auto& p : partial)
        total += p;
    return total;
}

} // namespace

LinearAdapter fit_adapter(const VolumeStack& features, const VolumeStack& target, const Volume* concat_input,
                          double ridge, bool softmax)
{
    require_same_geometry(features.geometry(), target.geometry(), "fit_adapter: feature and target grids differ");
    check_design(features, concat_input);
    if (!(ridge >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "ridge must be non-negative");

    const Design x{features, concat_input};
    const std::size_t p = x.cols();
    const std::size_t q = target.channel_count();
    const std::size_t n = features.geometry().voxel_count();
    if (n <= p)
        throw Error(ErrorCode::SingularSystem, "need more voxels (" + std::to_string(n) + ") than input channels (" +
                                                   std::to_string(p) + ")");

    // Column means, then the centred Gram and cross-product matrices.
    Eigen::VectorXd zero_x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    Eigen::VectorXd zero_y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    const Eigen::VectorXd mean_x = chunked_sum(n, zero_x, [&](std::size_t b, std::size_t e, Eigen::VectorXd& acc) {
        for (std::size_t v = b; v < e; ++v)
            for (std::size_t c = 0; c < p; ++c)
                acc[static_cast<Eigen::Index>(c)] += x(v, c);
    }) / static_cast<double>(n);
    const Eigen::VectorXd mean_y = chunked_sum(n, zero_y, [&](std::size_t b, std::size_t e, Eigen::VectorXd& acc) {
        for (std::size_t v = b; v < e; ++v)
            for (std::size_t c = 0; c < q; ++c)
                acc[static_cast<Eigen::Index>(c)] += target[c][v];
    }) / static_cast<double>(n);

    const auto pi = static_cast<Eigen::Index>(p);
    const auto qi = static_cast<Eigen::Index>(q);
    Eigen::MatrixXd zero_block = Eigen::MatrixXd::Zero(pi, pi + qi);
    const Eigen::MatrixXd blocks = chunked_sum(n, zero_block, [&](std::size_t b, std::size_t e, Eigen::MatrixXd& acc) {
        Eigen::VectorXd row(pi + qi);
        for (std::size_t v = b; v < e; ++v) {
            for (Eigen::Index c = 0; c < pi; ++c)
                row[c] = x(v, static_cast<std::size_t>(c)) - mean_x[c];
            for (Eigen::Index c = 0; c < qi; ++c)
                row[pi + c] = target[static_cast<std::size_t>(c)][v] - mean_y[c];
            acc.noalias() += row.head(pi) * row.transpose();
        }
    });
    Eigen::MatrixXd gram = blocks.leftCols(pi);
    const Eigen::MatrixXd cross = blocks.rightCols(qi);

    if (ridge == 0.0) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
        const double hi = eig.eigenvalues().maxCoeff();
        const double lo = eig.eigenvalues().minCoeff();
        if (!(hi > 0.0) || lo <= 1e-12 * hi)
            throw Error(ErrorCode::SingularSystem, "feature Gram matrix is rank-deficient; use a positive ridge");
    }
    gram.diagonal().array() += ridge;

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularSystem, "normal equations could not be factorized");

    LinearAdapter adapter;
    adapter.weights = ldlt.solve(cross);
    adapter.bias = mean_y - adapter.weights.transpose() * mean_x;
    adapter.concat_input = concat_input != nullptr;
    adapter.softmax = softmax;
    if (!adapter.weights.allFinite() || !adapter.bias.allFinite())
        throw Error(ErrorCode::SingularSystem, "least-squares solution is not finite");
    return adapter;
}

namespace {

void check_apply(const LinearAdapter& adapter, const VolumeStack& features, const Volume* concat_input)
{
    if (adapter.concat_input != (concat_input != nullptr))
        throw Error(ErrorCode::ChannelMismatch, adapter.concat_input ? "adapter expects a concatenated input image"
                                                                     : "adapter was fitted without an input image");
    if (features.channel_count() != adapter.feature_channels())
        throw Error(ErrorCode::ChannelMismatch, "adapter expects " + std::to_string(adapter.feature_channels()) +
                                                    " feature channels, got " +
                                                    std::to_string(features.channel_count()));
    check_design(features, concat_input);
}

} // namespace

VolumeStack apply_adapter(const LinearAdapter& adapter, const VolumeStack& features, const Volume* concat_input)
{
    check_apply(adapter, features, concat_input);
    const Design x{features, concat_input};
    const Geometry& g = features.geometry();
    const std::size_t p = adapter.in_channels();
    const std::size_t q = adapter.out_channels();
    std::vector<Volume> out(q, Volume(g));
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> y(q);
        for (std::size_t v = begin; v < end; ++v) {
            for (std::size_t o = 0; o < q; ++o) {
                double acc = adapter.bias[static_cast<Eigen::Index>(o)];
                for (std::size_t c = 0; c < p; ++c)
                    acc += x(v, c) * adapter.weights(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(o));
                y[o] = acc;
            }
            if (adapter.softmax) {
                const double peak = *std::max_element(y.begin(), y.end());
                double sum = 0.0;
                for (auto& val : y) {
                    val = std::exp(val - peak);
                    sum += val;
                }
                for (auto& val : y)
                    val /= sum;
            }
            for (std::size_t o = 0; o < q; ++o)
                out[o][v] = y[o];
        }
    });
    return VolumeStack(std::move(out));
}

Residual adapter_residual(const LinearAdapter& adapter, const VolumeStack& features, const VolumeStack& target,
                          const Volume* concat_input)
{
    LinearAdapter affine = adapter;
    affine.softmax = false;
    const VolumeStack pred = apply_adapter(affine, features, concat_input);
    if (pred.channel_count() != target.channel_count())
        throw Error(ErrorCode::ChannelMismatch, "target channel count differs from adapter outputs");
    require_same_geometry(pred.geometry(), target.geometry(), "adapter_residual: target grid differs");
    Residual r;
    double abs_sum = 0.0;
    for (std::size_t c = 0; c < pred.channel_count(); ++c)
        for (std::size_t v = 0; v < pred[c].size(); ++v) {
            const double d = pred[c][v] - target[c][v];
            r.sse += d * d;
            abs_sum += std::abs(d);
        }
    r.l1 = abs_sum / static_cast<double>(pred.channel_count() * pred.geometry().voxel_count());
    return r;
}

VolumeStack one_hot(const LabelMap& lm, const std::vector<std::int32_t>& labels)
{
    std::vector<Volume> out;
    for (std::int32_t l : labels) {
        Volume ch(lm.geometry());
        for (std::size_t i = 0; i < lm.size(); ++i)
            ch[i] = lm[i] == l ? 1.0 : 0.0;
        out.push_back(std::move(ch));
    }
    return VolumeStack(std::move(out));
}

double soft_dice_ce_loss(const VolumeStack& probs, const LabelMap& ref, std::vector<std::int32_t> labels)
{
    if (labels.empty())
        labels = ref.label_set();
    const std::size_t k = labels.size();
    if (probs.channel_count() != k)
        throw Error(ErrorCode::ChannelMismatch, "probability channels (" + std::to_string(probs.channel_count()) +
                                                    ") differ from label count (" + std::to_string(k) + ")");
    require_same_geometry(probs.geometry(), ref.geometry(), "soft_dice_ce_loss: grids differ");

    std::vector<int> channel_of(static_cast<std::size_t>(std::max(ref.label_set().back(), *std::max_element(labels.begin(), labels.end()))) + 1, -1);
    for (std::size_t c = 0; c < k; ++c)
        channel_of[static_cast<std::size_t>(labels[c])] = static_cast<int>(c);

    const std::size_t n = ref.size();
    std::vector<double> inter(k, 0.0), p_sum(k, 0.0), g_sum(k, 0.0);
    double ce = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double pc = probs[c][v];
            if (pc < -1e-9 || !std::isfinite(pc))
                throw Error(ErrorCode::NotASimplex, "negative probability at voxel " + std::to_string(v));
            total += pc;
            p_sum[c] += pc;
        }
        if (std::abs(total - 1.0) > 1e-6)
            throw Error(ErrorCode::NotASimplex, "probabilities sum to " + std::to_string(total) + " at voxel " +
                                                    std::to_string(v));
        const int truth = channel_of[static_cast<std::size_t>(ref[v])];
        if (truth < 0)
            throw Error(ErrorCode::InvalidArgument, "reference label " + std::to_string(ref[v]) + " has no channel");
        const auto t = static_cast<std::size_t>(truth);
        inter[t] += probs[t][v];
        g_sum[t] += 1.0;
        ce -= std::log(std::max(probs[t][v], 1e-12));
    }
    double dice_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double denom = p_sum[c] + g_sum[c];
        if (denom <= 0.0)
            continue;
        dice_sum += 2.0 * inter[c] / denom;
        ++counted;
    }
    const double mean_dice = counted ? dice_sum / static_cast<double>(counted) : 1.0;
    return (1.0 - mean_dice) + ce / static_cast<double>(n);
}

double l2_loss(const Volume& pred, const Volume& ref)
{
    require_same_geometry(pred.geometry(), ref.geometry(), "l2_loss: grids differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - ref[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.size());
}

} // namespace brainid
