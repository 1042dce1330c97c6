#include "fsrl/toymodel.hpp"

#include "fsrl/errors.hpp"
#include "fsrl/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <string>

namespace fsrl {

void ModelConfig::validate() const {
    if (image_size < 1 || in_channels < 1 || conv1_channels < 1 || conv2_channels < 1 || kernel < 1 ||
        num_categories < 1 || projection_dim < 1)
        throw ValidationError("model config: all sizes must be positive");
    if (feature_size() < 1) throw ValidationError("model config: image too small for two valid convolutions");
}

const char* to_string(ParamGroup group) {
    switch (group) {
        case ParamGroup::Conv1Weight: return "conv1.weight";
        case ParamGroup::Conv1Bias: return "conv1.bias";
        case ParamGroup::Conv2Weight: return "conv2.weight";
        case ParamGroup::Conv2Bias: return "conv2.bias";
        case ParamGroup::ClassifierWeight: return "classifier.weight";
        case ParamGroup::ClassifierBias: return "classifier.bias";
        case ParamGroup::Projection: return "projection.weight";
    }
    return "?";
}

ToyModelParams::ToyModelParams(const ModelConfig& cfg) : config(cfg) {
    config.validate();
    values.assign(offset(ParamGroup::Projection) + count(ParamGroup::Projection), 0.0);
}

std::size_t ToyModelParams::count(ParamGroup g) const {
    const auto k2 = static_cast<std::size_t>(config.kernel * config.kernel);
    const auto c1 = static_cast<std::size_t>(config.conv1_channels);
    const auto c2 = static_cast<std::size_t>(config.conv2_channels);
    const auto cls = static_cast<std::size_t>(config.num_categories);
    switch (g) {
        case ParamGroup::Conv1Weight: return c1 * static_cast<std::size_t>(config.in_channels) * k2;
        case ParamGroup::Conv1Bias: return c1;
        case ParamGroup::Conv2Weight: return c2 * c1 * k2;
        case ParamGroup::Conv2Bias: return c2;
        case ParamGroup::ClassifierWeight: return cls * c2;
        case ParamGroup::ClassifierBias: return cls;
        case ParamGroup::Projection: return static_cast<std::size_t>(config.projection_dim) * c2;
    }
    return 0;
}

std::size_t ToyModelParams::offset(ParamGroup g) const {
    std::size_t off = 0;
    for (ParamGroup other : kAllParamGroups) {
        if (other == g) return off;
        off += count(other);
    }
    return off;
}

std::span<double> ToyModelParams::group(ParamGroup g) { return {values.data() + offset(g), count(g)}; }
std::span<const double> ToyModelParams::group(ParamGroup g) const { return {values.data() + offset(g), count(g)}; }

Eigen::MatrixXd ToyModelParams::classifier_weights() const {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        group(ParamGroup::ClassifierWeight).data(), config.num_categories, config.conv2_channels);
}

Eigen::VectorXd ToyModelParams::classifier_bias() const {
    return Eigen::Map<const Eigen::VectorXd>(group(ParamGroup::ClassifierBias).data(), config.num_categories);
}

Eigen::MatrixXd ToyModelParams::projection_weights() const {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        group(ParamGroup::Projection).data(), config.projection_dim, config.conv2_channels);
}

ToyModelParams init_params(const ModelConfig& config, Rng& rng) {
    ToyModelParams p(config);
    auto fill = [&](ParamGroup g, double scale) {
        for (double& v : p.group(g)) v = scale * rng.normal();
    };
    const double k2 = config.kernel * config.kernel;
    fill(ParamGroup::Conv1Weight, std::sqrt(2.0 / (config.in_channels * k2)));
    fill(ParamGroup::Conv2Weight, std::sqrt(2.0 / (config.conv1_channels * k2)));
    fill(ParamGroup::ClassifierWeight, std::sqrt(1.0 / config.conv2_channels));
    fill(ParamGroup::Projection, std::sqrt(1.0 / config.conv2_channels));
    // Small positive biases keep ReLUs alive at the start.
    for (double& v : p.group(ParamGroup::Conv1Bias)) v = 0.01;
    for (double& v : p.group(ParamGroup::Conv2Bias)) v = 0.01;
    return p;
}

void save_params(const std::filesystem::path& stem, const ToyModelParams& params) {
    auto matrix_path = stem;
    matrix_path += ".fmat";
    Eigen::MatrixXd flat = Eigen::Map<const Eigen::MatrixXd>(params.values.data(), 1,
                                                             static_cast<Eigen::Index>(params.values.size()));
    write_matrix_binary(matrix_path, flat);
    const auto& c = params.config;
    nlohmann::ordered_json j = {{"image_size", c.image_size},         {"in_channels", c.in_channels},
                                {"conv1_channels", c.conv1_channels}, {"conv2_channels", c.conv2_channels},
                                {"kernel", c.kernel},                 {"num_categories", c.num_categories},
                                {"projection_dim", c.projection_dim}, {"parameter_count", params.values.size()}};
    auto json_path = stem;
    json_path += ".json";
    std::ofstream out(json_path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + json_path.string() + " for writing");
    out << j.dump(2) << '\n';
}

ToyModelParams load_params(const std::filesystem::path& stem) {
    auto json_path = stem;
    json_path += ".json";
    std::ifstream in(json_path);
    if (!in) throw IoError("cannot open " + json_path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(json_path.string() + ": " + e.what());
    }
    ModelConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.in_channels = j.at("in_channels").get<int>();
    c.conv1_channels = j.at("conv1_channels").get<int>();
    c.conv2_channels = j.at("conv2_channels").get<int>();
    c.kernel = j.at("kernel").get<int>();
    c.num_categories = j.at("num_categories").get<int>();
    c.projection_dim = j.at("projection_dim").get<int>();
    ToyModelParams p(c);
    auto matrix_path = stem;
    matrix_path += ".fmat";
    const Eigen::MatrixXd flat = read_matrix_binary(matrix_path);
    if (flat.size() != static_cast<Eigen::Index>(p.values.size()))
        throw IoError(matrix_path.string() + ": parameter count does not match the config");
    for (Eigen::Index i = 0; i < flat.size(); ++i) p.values[static_cast<std::size_t>(i)] = flat(i);
    return p;
}

namespace {

// Valid cross-correlation plus bias, followed by ReLU.
FeatureMap conv_relu(const FeatureMap& in, std::span<const double> w, std::span<const double> b, int out_channels,
                     int k) {
    const int oh = in.height - k + 1;
    const int ow = in.width - k + 1;
    FeatureMap out(oh, ow, out_channels);
    for (int o = 0; o < out_channels; ++o) {
        double* dst = out.ptr(o, 0, 0);
        for (int i = 0; i < oh * ow; ++i) dst[i] = b[static_cast<std::size_t>(o)];
        for (int c = 0; c < in.channels; ++c) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double wv = w[static_cast<std::size_t>(((o * in.channels + c) * k + ky) * k + kx)];
                    for (int y = 0; y < oh; ++y) {
                        const double* src = in.ptr(c, y + ky, kx);
                        double* row = dst + y * ow;
                        for (int x = 0; x < ow; ++x) row[x] += wv * src[x];
                    }
                }
            }
        }
        for (int i = 0; i < oh * ow; ++i) dst[i] = dst[i] > 0.0 ? dst[i] : 0.0;
    }
    return out;
}

// Given dL/d(out) already masked by the ReLU, accumulates weight/bias gradients and
// optionally dL/d(in).
void conv_backward(const FeatureMap& in, const FeatureMap& grad_pre, std::span<const double> w, int k,
                   std::span<double> grad_w, std::span<double> grad_b, FeatureMap* grad_in) {
    const int oh = grad_pre.height;
    const int ow = grad_pre.width;
    for (int o = 0; o < grad_pre.channels; ++o) {
        const double* g = grad_pre.ptr(o, 0, 0);
        double bsum = 0.0;
        for (int i = 0; i < oh * ow; ++i) bsum += g[i];
        grad_b[static_cast<std::size_t>(o)] += bsum;
        for (int c = 0; c < in.channels; ++c) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const auto widx = static_cast<std::size_t>(((o * in.channels + c) * k + ky) * k + kx);
                    double acc = 0.0;
                    for (int y = 0; y < oh; ++y) {
                        const double* src = in.ptr(c, y + ky, kx);
                        const double* gr = g + y * ow;
                        for (int x = 0; x < ow; ++x) acc += gr[x] * src[x];
                    }
                    grad_w[widx] += acc;
                    if (grad_in) {
                        const double wv = w[widx];
                        for (int y = 0; y < oh; ++y) {
                            double* dst = &grad_in->at(c, y + ky, kx);
                            const double* gr = g + y * ow;
                            for (int x = 0; x < ow; ++x) dst[x] += wv * gr[x];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

ForwardResult forward(const ToyModelParams& params, const Image& image) {
    const ModelConfig& c = params.config;
    if (image.height != c.image_size || image.width != c.image_size || image.channels != c.in_channels)
        throw ValidationError("forward: image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                              "x" + std::to_string(image.channels) + ", model expects " +
                              std::to_string(c.image_size) + "x" + std::to_string(c.image_size) + "x" +
                              std::to_string(c.in_channels));
    ForwardResult r;
    r.input = FeatureMap(image.height, image.width, image.channels);
    for (int ch = 0; ch < image.channels; ++ch)
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x) r.input.at(ch, y, x) = image.at(y, x, ch) / 255.0 - 0.5;

    r.hidden = conv_relu(r.input, params.group(ParamGroup::Conv1Weight), params.group(ParamGroup::Conv1Bias),
                         c.conv1_channels, c.kernel);
    r.feature_map = conv_relu(r.hidden, params.group(ParamGroup::Conv2Weight), params.group(ParamGroup::Conv2Bias),
                              c.conv2_channels, c.kernel);

    const double area = static_cast<double>(r.feature_map.height) * r.feature_map.width;
    r.pooled = Eigen::VectorXd::Zero(c.conv2_channels);
    for (int k = 0; k < c.conv2_channels; ++k) {
        double s = 0.0;
        const double* src = &r.feature_map.at(k, 0, 0);
        for (int i = 0; i < r.feature_map.height * r.feature_map.width; ++i) s += src[i];
        r.pooled[k] = s / area;
    }
    r.scores = params.classifier_weights() * r.pooled + params.classifier_bias();
    return r;
}

BackwardResult backward(const ToyModelParams& params, const ForwardResult& fwd, const Eigen::VectorXd& grad_scores,
                        const Eigen::VectorXd& grad_pooled, bool conv1) {
    const ModelConfig& c = params.config;
    if (grad_scores.size() != c.num_categories || grad_pooled.size() != c.conv2_channels)
        throw ValidationError("backward: upstream gradient shape mismatch");

    BackwardResult r;
    r.grads.assign(params.values.size(), 0.0);
    auto grad = [&](ParamGroup g) { return std::span<double>(r.grads.data() + params.offset(g), params.count(g)); };

    auto gw = grad(ParamGroup::ClassifierWeight);
    for (int i = 0; i < c.num_categories; ++i)
        for (int k = 0; k < c.conv2_channels; ++k)
            gw[static_cast<std::size_t>(i * c.conv2_channels + k)] = grad_scores[i] * fwd.pooled[k];
    auto gb = grad(ParamGroup::ClassifierBias);
    for (int i = 0; i < c.num_categories; ++i) gb[static_cast<std::size_t>(i)] = grad_scores[i];

    const Eigen::VectorXd d_pooled = params.classifier_weights().transpose() * grad_scores + grad_pooled;

    const FeatureMap& fm = fwd.feature_map;
    const double area = static_cast<double>(fm.height) * fm.width;
    r.feature_map = FeatureMap(fm.height, fm.width, fm.channels);
    FeatureMap grad_pre2(fm.height, fm.width, fm.channels);
    for (int k = 0; k < fm.channels; ++k) {
        const double g = d_pooled[k] / area;
        for (int y = 0; y < fm.height; ++y) {
            for (int x = 0; x < fm.width; ++x) {
                r.feature_map.at(k, y, x) = g;
                grad_pre2.at(k, y, x) = fm.at(k, y, x) > 0.0 ? g : 0.0;
            }
        }
    }

    FeatureMap grad_hidden(fwd.hidden.height, fwd.hidden.width, fwd.hidden.channels);
    conv_backward(fwd.hidden, grad_pre2, params.group(ParamGroup::Conv2Weight), c.kernel, grad(ParamGroup::Conv2Weight),
                  grad(ParamGroup::Conv2Bias), conv1 ? &grad_hidden : nullptr);
    if (!conv1) return r;

    for (std::size_t i = 0; i < grad_hidden.values.size(); ++i)
        if (!(fwd.hidden.values[i] > 0.0)) grad_hidden.values[i] = 0.0;
    conv_backward(fwd.input, grad_hidden, params.group(ParamGroup::Conv1Weight), c.kernel,
                  grad(ParamGroup::Conv1Weight), grad(ParamGroup::Conv1Bias), nullptr);
    return r;
}

FeatureMap score_gradient(const ToyModelParams& params, const ForwardResult& fwd, int category) {
    const ModelConfig& c = params.config;
    if (category < 0 || category >= c.num_categories)
        throw ValidationError("score gradient: category " + std::to_string(category) + " out of range");
    // The score is linear in the pooled vector, so only the GAP and classifier stages matter.
    const auto w = params.group(ParamGroup::ClassifierWeight);
    const FeatureMap& fm = fwd.feature_map;
    const double area = static_cast<double>(fm.height) * fm.width;
    FeatureMap g(fm.height, fm.width, fm.channels);
    for (int k = 0; k < fm.channels; ++k) {
        const double v = w[static_cast<std::size_t>(category * c.conv2_channels + k)] / area;
        for (int y = 0; y < fm.height; ++y)
            for (int x = 0; x < fm.width; ++x) g.at(k, y, x) = v;
    }
    return g;
}

CrossEntropy cross_entropy(const Eigen::VectorXd& scores, int target, std::span<const int> allowed) {
    const auto n = static_cast<int>(scores.size());
    if (target < 0 || target >= n) throw ValidationError("cross entropy: target out of range");
    std::vector<int> classes(allowed.begin(), allowed.end());
    if (classes.empty())
        for (int i = 0; i < n; ++i) classes.push_back(i);
    double m = -std::numeric_limits<double>::infinity();
    bool has_target = false;
    for (int i : classes) {
        m = std::max(m, scores[i]);
        has_target = has_target || i == target;
    }
    if (!has_target) throw ValidationError("cross entropy: target not among allowed classes");
    double z = 0.0;
    for (int i : classes) z += std::exp(scores[i] - m);
    const double lse = m + std::log(z);
    CrossEntropy ce;
    ce.loss = lse - scores[target];
    ce.grad = Eigen::VectorXd::Zero(n);
    for (int i : classes) ce.grad[i] = std::exp(scores[i] - lse);
    ce.grad[target] -= 1.0;
    return ce;
}

FeatureMap ToyModelAttribution::feature_map(const Image& image) const { return forward(params_, image).feature_map; }

FeatureMap ToyModelAttribution::score_gradient(const Image& image, int category) const {
    if (category < 0 || category >= params_.config.num_categories)
        throw ValidationError("score gradient: category " + std::to_string(category) + " out of range");
    const ForwardResult fwd = forward(params_, image);
    // Routed through the general reverse pass so the attribution uses the same code as training.
    Eigen::VectorXd seed = Eigen::VectorXd::Zero(params_.config.num_categories);
    seed[category] = 1.0;
    return backward(params_, fwd, seed, Eigen::VectorXd::Zero(params_.config.conv2_channels), false).feature_map;
}

}  // namespace fsrl
