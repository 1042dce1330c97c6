#pragma once

#include "fsrl/counterfactual.hpp"
#include "fsrl/image.hpp"
#include "fsrl/rng.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <vector>

namespace fsrl {

// conv(3x3, valid) -> ReLU -> conv(3x3, valid) -> ReLU -> global average pool -> linear.
// The pooled vector also feeds the contrastive projection (projection_dim x conv2_channels).
struct ModelConfig {
    int image_size = 16;
    int in_channels = 3;
    int conv1_channels = 6;
    int conv2_channels = 12;
    int kernel = 3;
    int num_categories = 12;
    int projection_dim = 128;

    int conv1_size() const { return image_size - kernel + 1; }
    int feature_size() const { return conv1_size() - kernel + 1; }
    int embedding_dim() const { return conv2_channels; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

enum class ParamGroup { Conv1Weight, Conv1Bias, Conv2Weight, Conv2Bias, ClassifierWeight, ClassifierBias, Projection };
inline constexpr ParamGroup kAllParamGroups[] = {ParamGroup::Conv1Weight,      ParamGroup::Conv1Bias,
                                                 ParamGroup::Conv2Weight,      ParamGroup::Conv2Bias,
                                                 ParamGroup::ClassifierWeight, ParamGroup::ClassifierBias,
                                                 ParamGroup::Projection};
const char* to_string(ParamGroup group);

// All parameters in one flat vector; groups are contiguous slices.
struct ToyModelParams {
    ModelConfig config;
    std::vector<double> values;

    explicit ToyModelParams(const ModelConfig& config = {});

    std::size_t offset(ParamGroup group) const;
    std::size_t count(ParamGroup group) const;
    std::span<double> group(ParamGroup group);
    std::span<const double> group(ParamGroup group) const;

    Eigen::MatrixXd classifier_weights() const;  // C x d
    Eigen::VectorXd classifier_bias() const;
    Eigen::MatrixXd projection_weights() const;  // projection_dim x d

    bool operator==(const ToyModelParams&) const = default;
};

// He-style random initialization from `rng`.
ToyModelParams init_params(const ModelConfig& config, Rng& rng);

// Checkpoint: <stem>.fmat holds the flat parameters as a 1 x P matrix, <stem>.json the config.
void save_params(const std::filesystem::path& stem, const ToyModelParams& params);
ToyModelParams load_params(const std::filesystem::path& stem);

struct ForwardResult {
    FeatureMap input;        // pixels scaled to [-0.5, 0.5]
    FeatureMap hidden;       // first conv after ReLU
    FeatureMap feature_map;  // second conv after ReLU; the map Grad-CAM reads
    Eigen::VectorXd pooled;
    Eigen::VectorXd scores;
};

ForwardResult forward(const ToyModelParams& params, const Image& image);

struct BackwardResult {
    std::vector<double> grads;   // same layout as ToyModelParams::values
    FeatureMap feature_map;      // dL/d(feature_map)
};

// Reverse pass for upstream gradients on the class scores and on the pooled vector.
// With `conv1` false the first-layer gradients are left at zero and not computed.
BackwardResult backward(const ToyModelParams& params, const ForwardResult& fwd, const Eigen::VectorXd& grad_scores,
                        const Eigen::VectorXd& grad_pooled, bool conv1 = true);

// d(score of `category`)/d(feature_map).
FeatureMap score_gradient(const ToyModelParams& params, const ForwardResult& fwd, int category);

// Softmax cross-entropy restricted to `allowed` classes (all when empty).
struct CrossEntropy {
    double loss = 0.0;
    Eigen::VectorXd grad;
};
CrossEntropy cross_entropy(const Eigen::VectorXd& scores, int target, std::span<const int> allowed = {});

class ToyModelAttribution : public AttributionSource {
public:
    explicit ToyModelAttribution(const ToyModelParams& params) : params_(params) {}
    int num_categories() const override { return params_.config.num_categories; }
    FeatureMap feature_map(const Image& image) const override;
    FeatureMap score_gradient(const Image& image, int category) const override;

private:
    const ToyModelParams& params_;
};

}  // namespace fsrl
