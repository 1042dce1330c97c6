#include "fsrl/counterfactual.hpp"

#include "fsrl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fsrl {

Eigen::VectorXd channel_weights(const FeatureMap& grad) {
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(grad.channels);
    const double area = static_cast<double>(grad.height) * grad.width;
    for (int k = 0; k < grad.channels; ++k) {
        double sum = 0.0;
        for (int y = 0; y < grad.height; ++y)
            for (int x = 0; x < grad.width; ++x) sum += grad.at(k, y, x);
        alpha[k] = sum / area;
    }
    return alpha;
}

AttributionMap gradcam(const FeatureMap& features, const Eigen::VectorXd& alpha) {
    if (alpha.size() != features.channels)
        throw ValidationError("Grad-CAM: " + std::to_string(alpha.size()) + " channel weights for a " +
                              std::to_string(features.channels) + "-channel feature map");
    AttributionMap map = AttributionMap::Zero(features.height, features.width);
    for (int k = 0; k < features.channels; ++k)
        for (int y = 0; y < features.height; ++y)
            for (int x = 0; x < features.width; ++x) map(y, x) += alpha[k] * features.at(k, y, x);
    return map.cwiseMax(0.0);
}

AttributionMap normalize_map(const AttributionMap& map) {
    if (map.size() == 0) return map;
    const double lo = map.minCoeff();
    const double hi = map.maxCoeff();
    if (!(hi > lo)) return AttributionMap::Zero(map.rows(), map.cols());
    return (map.array() - lo) / (hi - lo);
}

AttributionMap counterfactual_map(const AttributionMap& a_c, const AttributionMap& a_counter) {
    if (a_c.rows() != a_counter.rows() || a_c.cols() != a_counter.cols())
        throw ValidationError("counterfactual map: attribution maps differ in shape");
    if (a_c.size() == 0) return a_c;
    const double peak = a_counter.maxCoeff();
    return normalize_map(a_c.cwiseProduct((peak - a_counter.array()).matrix()));
}

AttributionMap resize_bilinear(const AttributionMap& map, int height, int width) {
    if (map.size() == 0 || height <= 0 || width <= 0) throw ValidationError("resize: empty source or target");
    const auto src_h = static_cast<int>(map.rows());
    const auto src_w = static_cast<int>(map.cols());
    AttributionMap out(height, width);
    const double sy = static_cast<double>(src_h) / height;
    const double sx = static_cast<double>(src_w) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, src_h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, src_w - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * map(y0, x0) + wx * map(y0, x1);
            const double bottom = (1.0 - wx) * map(y1, x0) + wx * map(y1, x1);
            out(y, x) = (1.0 - wy) * top + wy * bottom;
        }
    }
    return out;
}

ErasureMask erase_mask(const AttributionMap& a, double t, Box box) {
    if (!(t > 0.0 && t < 1.0)) throw ValidationError("erase threshold must lie in (0,1)");
    if (a.rows() != box.height || a.cols() != box.width)
        throw ValidationError("erase mask: attribution map does not match the box size");
    if (a.size() > 0 && !(a.minCoeff() >= 0.0 && a.maxCoeff() <= 1.0))
        throw ValidationError("erase mask: attribution map is not normalized to [0,1]");
    ErasureMask mask;
    mask.box = box;
    mask.grid.resize(a.rows(), a.cols());
    for (Eigen::Index y = 0; y < a.rows(); ++y)
        for (Eigen::Index x = 0; x < a.cols(); ++x) mask.grid(y, x) = a(y, x) >= t ? 0 : 1;
    return mask;
}

ErasureMask erase_mask(const AttributionMap& a, double t) {
    return erase_mask(a, t, Box{0, 0, static_cast<int>(a.rows()), static_cast<int>(a.cols())});
}

AugmentedSample apply_mask(const Image& image, const ErasureMask& mask, std::uint64_t seed, int label) {
    const Box& b = mask.box;
    if (b.y < 0 || b.x < 0 || b.y + b.height > image.height || b.x + b.width > image.width ||
        mask.grid.rows() != b.height || mask.grid.cols() != b.width)
        throw ValidationError("apply mask: mask box does not fit the image");
    AugmentedSample out{image, label, true};
    Rng fill(seed, 0x66696c6cULL);
    for (int y = 0; y < b.height; ++y) {
        for (int x = 0; x < b.width; ++x) {
            const bool keep = mask.grid(y, x) != 0;
            for (int c = 0; c < image.channels; ++c) {
                const std::uint8_t noise = fill.byte();
                if (!keep) out.image.at(b.y + y, b.x + x, c) = noise;
            }
        }
    }
    return out;
}

ErasureMask random_box_mask(Box box, Rng& rng) {
    ErasureMask mask;
    mask.box = box;
    mask.grid = MaskGrid::Ones(box.height, box.width);
    auto side = [&](int n) {
        const int lo = std::max(1, n / 4);
        const int hi = std::max(lo, n / 2);
        return lo + static_cast<int>(rng.index(static_cast<std::uint64_t>(hi - lo + 1)));
    };
    const int h = side(box.height);
    const int w = side(box.width);
    const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(box.height - h + 1)));
    const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(box.width - w + 1)));
    mask.grid.block(y0, x0, h, w).setZero();
    return mask;
}

AttributionMap class_attribution(const AttributionSource& model, const Image& image, int category) {
    return gradcam(model.feature_map(image), channel_weights(model.score_gradient(image, category)));
}

AugmentedSample augment(const Image& image, int label, Box box, const AttributionSource& model,
                        const KnowledgeMatrix& zeta, const AugmentOptions& options, Rng& rng, AugmentTrace* trace) {
    if (zeta.size() != model.num_categories())
        throw ValidationError("augment: knowledge matrix covers " + std::to_string(zeta.size()) +
                              " categories, model has " + std::to_string(model.num_categories()));
    const std::vector<int> candidates = top_counter_categories(zeta, label, options.k_e);
    const int counter = candidates[rng.index(candidates.size())];
    const std::uint64_t fill_seed = rng.next();

    const FeatureMap features = model.feature_map(image);
    AttributionMap a_c = gradcam(features, channel_weights(model.score_gradient(image, label)));
    AttributionMap a_counter = gradcam(features, channel_weights(model.score_gradient(image, counter)));
    AttributionMap cf = counterfactual_map(a_c, a_counter);
    AttributionMap up = resize_bilinear(cf, box.height, box.width);
    ErasureMask mask = erase_mask(up, options.threshold, box);
    AugmentedSample out = apply_mask(image, mask, fill_seed, label);

    if (trace) {
        trace->candidates = candidates;
        trace->counter_category = counter;
        trace->a_c = std::move(a_c);
        trace->a_counter = std::move(a_counter);
        trace->counterfactual = std::move(cf);
        trace->upsampled = std::move(up);
        trace->fill_seed = fill_seed;
        trace->erased_pixels = static_cast<int>((mask.grid.array() == 0).count());
        trace->mask = std::move(mask);
    }
    return out;
}

}  // namespace fsrl
