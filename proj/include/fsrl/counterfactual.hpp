#pragma once

#include "fsrl/image.hpp"
#include "fsrl/knowledge.hpp"
#include "fsrl/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace fsrl {

inline constexpr double kDefaultEraseThreshold = 0.8;
inline constexpr int kDefaultCounterCategories = 3;
inline constexpr double kDefaultAugmentProbability = 0.05;

// Region of an image, in pixels.
struct Box {
    int y = 0;
    int x = 0;
    int height = 0;
    int width = 0;
    bool operator==(const Box&) const = default;
};

using MaskGrid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// 0 = erase, 1 = keep, at box resolution.
struct ErasureMask {
    MaskGrid grid;
    Box box;
};

struct AugmentedSample {
    Image image;
    int label = 0;
    bool is_augmented = true;
};

// Spatial mean of each channel of d(score)/d(features).
Eigen::VectorXd channel_weights(const FeatureMap& grad);

// ReLU(sum_k alpha_k * features_k).
AttributionMap gradcam(const FeatureMap& features, const Eigen::VectorXd& alpha);

// Min-max scaling to [0, 1]; a constant map becomes all zeros.
AttributionMap normalize_map(const AttributionMap& map);

// norm(A_c .* (max(A_counter) - A_counter)): regions that support c but not the counter category.
AttributionMap counterfactual_map(const AttributionMap& a_c, const AttributionMap& a_counter);

// Bilinear resampling with half-pixel centers and edge clamping.
AttributionMap resize_bilinear(const AttributionMap& map, int height, int width);

// H = 0 where A >= t, 1 where A < t. `t` must lie in (0, 1) and A in [0, 1].
ErasureMask erase_mask(const AttributionMap& a, double t, Box box);
ErasureMask erase_mask(const AttributionMap& a, double t);

// x * H + E * (1 - H) over the mask's box, E uniform in [0, 255] per pixel and channel.
// One fill value is drawn for every box pixel and channel in row-major order, erased or not.
AugmentedSample apply_mask(const Image& image, const ErasureMask& mask, std::uint64_t seed, int label = 0);

// Random rectangle covering a quarter to a half of each box side; the saliency-free baseline.
ErasureMask random_box_mask(Box box, Rng& rng);

// Anything that can report a feature map and the gradient of a class score with respect to it.
class AttributionSource {
public:
    virtual ~AttributionSource() = default;
    virtual int num_categories() const = 0;
    virtual FeatureMap feature_map(const Image& image) const = 0;
    virtual FeatureMap score_gradient(const Image& image, int category) const = 0;
};

AttributionMap class_attribution(const AttributionSource& model, const Image& image, int category);

struct AugmentOptions {
    int k_e = kDefaultCounterCategories;
    double threshold = kDefaultEraseThreshold;
};

// Intermediate products of one augmentation, for previews and tests.
struct AugmentTrace {
    std::vector<int> candidates;
    int counter_category = -1;
    AttributionMap a_c;
    AttributionMap a_counter;
    AttributionMap counterfactual;
    AttributionMap upsampled;
    ErasureMask mask;
    std::uint64_t fill_seed = 0;
    int erased_pixels = 0;
};

// Draws a counter category uniformly from the k_e most similar ones, builds the counterfactual
// map, resamples it to `box`, thresholds it and fills the erased pixels with noise.
AugmentedSample augment(const Image& image, int label, Box box, const AttributionSource& model,
                        const KnowledgeMatrix& zeta, const AugmentOptions& options, Rng& rng,
                        AugmentTrace* trace = nullptr);

}  // namespace fsrl
