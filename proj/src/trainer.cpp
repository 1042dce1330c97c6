#include "fsrl/trainer.hpp"

#include "fsrl/counterfactual.hpp"
#include "fsrl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>

namespace fsrl {

namespace {

// Named RNG streams. Each stage draws from its own stream so toggling one feature does not
// shift the random sequence seen by another.
constexpr std::uint64_t kInitStream = 0x696e6974;        // "init"
constexpr std::uint64_t kBaseDataStream = 0x62617365;    // "base"
constexpr std::uint64_t kFineDataStream = 0x66696e65;    // "fine"
constexpr std::uint64_t kAugmentStream = 0x61756720;     // "aug "
constexpr std::uint64_t kClusterSeedSalt = 0x636c7573ULL;

using json = nlohmann::json;

struct Field {
    ConfigKey info;
    std::function<json(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const json&)> set;
};

template <typename T>
T expect(const json& j, const std::string& key) {
    if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) throw ValidationError("config key '" + key + "' expects true or false");
        return j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!j.is_string()) throw ValidationError("config key '" + key + "' expects a string");
        return j.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!j.is_number_unsigned()) throw ValidationError("config key '" + key + "' expects a non-negative integer");
        return j.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!j.is_number_integer()) throw ValidationError("config key '" + key + "' expects an integer");
        const auto v = j.get<std::int64_t>();
        if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max())
            throw ValidationError("config key '" + key + "' is out of range");
        return static_cast<T>(v);
    } else {
        if (!j.is_number()) throw ValidationError("config key '" + key + "' expects a number");
        return j.get<T>();
    }
}

template <typename T>
Field field(std::string key, std::string help, T TrainConfig::*member) {
    Field f{{key, std::move(help)}, nullptr, nullptr};
    f.get = [member](const TrainConfig& c) { return json(c.*member); };
    f.set = [member, key](TrainConfig& c, const json& j) { c.*member = expect<T>(j, key); };
    return f;
}

template <typename T>
Field lambda_field(std::string key, std::string help, T LossWeights::*member) {
    Field f{{key, std::move(help)}, nullptr, nullptr};
    f.get = [member](const TrainConfig& c) { return json(c.lambdas.*member); };
    f.set = [member, key](TrainConfig& c, const json& j) { c.lambdas.*member = expect<T>(j, key); };
    return f;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        field("stage", "training stage: base or finetune", &TrainConfig::stage),
        field("k_shot", "labeled instances per category in the fine-tuning set", &TrainConfig::k_shot),
        field("ccl.tau", "contrastive temperature", &TrainConfig::tau),
        field("ccl.normalize", "L2-normalize projected embeddings", &TrainConfig::normalize_embeddings),
        lambda_field("loss.lambda_cls", "weight of the classification loss", &LossWeights::cls),
        lambda_field("loss.lambda_reg", "weight of the box regression loss (always 0 here)", &LossWeights::reg),
        lambda_field("loss.lambda_ccl", "weight of the contrastive loss", &LossWeights::ccl),
        field("augment.epsilon", "per-image probability of counterfactual augmentation", &TrainConfig::epsilon),
        field("augment.threshold", "attribution threshold above which pixels are erased", &TrainConfig::threshold),
        field("augment.k_e", "number of candidate counter categories", &TrainConfig::k_e),
        field("bank.clusters", "prototypes per category drawn from the bank", &TrainConfig::bank_clusters),
        field("knowledge.case", "side-information case used to build the knowledge matrix (1-5)",
              &TrainConfig::knowledge_case),
        field("knowledge.clusters", "k-means centers per category for embedding similarity",
              &TrainConfig::knowledge_clusters),
        field("seed.data", "seed of the data sampling stream", &TrainConfig::seed_data),
        field("seed.augmentation", "seed of the augmentation stream", &TrainConfig::seed_augmentation),
        field("seed.init", "seed of the parameter initialization stream", &TrainConfig::seed_init),
        field("base.learning_rate", "SGD step size for base training", &TrainConfig::base_learning_rate),
        field("base.iterations", "base training iterations", &TrainConfig::base_iterations),
        field("base.batch_size", "images per base training iteration", &TrainConfig::base_batch_size),
        field("finetune.learning_rate", "SGD step size for fine-tuning", &TrainConfig::learning_rate),
        field("finetune.iterations", "fine-tuning iterations", &TrainConfig::iterations),
        field("finetune.samples_per_category", "images per category in each fine-tuning batch",
              &TrainConfig::samples_per_category),
        field("finetune.unfreeze_conv2", "train the second conv layer during fine-tuning",
              &TrainConfig::unfreeze_conv2),
        field("model.conv1_channels", "channels of the first conv layer", &TrainConfig::conv1_channels),
        field("model.conv2_channels", "channels of the second conv layer (embedding size)",
              &TrainConfig::conv2_channels),
        field("model.projection_dim", "output size of the contrastive projection", &TrainConfig::projection_dim),
        field("ablation.use_ccl", "add the contrastive loss", &TrainConfig::use_ccl),
        field("ablation.use_knowledge_matrix", "weight negatives by the knowledge matrix (all ones otherwise)",
              &TrainConfig::use_knowledge_matrix),
        field("ablation.use_clustering", "cluster bank entries into prototypes (every entry otherwise)",
              &TrainConfig::use_clustering),
        field("ablation.use_counterfactual", "apply counterfactual augmentation", &TrainConfig::use_counterfactual),
        field("ablation.use_random_mask_baseline", "erase a random rectangle instead of the counterfactual region",
              &TrainConfig::use_random_mask_baseline),
    };
    return table;
}

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.info.key == key) return f;
    throw ValidationError("unknown config key '" + key + "'");
}

std::vector<int> range(int begin, int end) {
    std::vector<int> v(static_cast<std::size_t>(std::max(0, end - begin)));
    std::iota(v.begin(), v.end(), begin);
    return v;
}

void sgd_step(ToyModelParams& params, const std::vector<double>& grads, double lr, std::span<const ParamGroup> groups) {
    for (ParamGroup g : groups) {
        const auto off = params.offset(g);
        auto values = params.group(g);
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * grads[off + i];
    }
}

void require_finite(const ToyModelParams& params, const char* stage) {
    for (double v : params.values)
        if (!std::isfinite(v)) throw ValidationError(std::string(stage) + " diverged: non-finite parameters");
}

Eigen::MatrixXd pooled_matrix(const std::vector<ForwardResult>& fwds) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(fwds.size()), fwds.empty() ? 0 : fwds.front().pooled.size());
    for (std::size_t i = 0; i < fwds.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = fwds[i].pooled.transpose();
    return m;
}

Box whole_image(const Image& image) { return {0, 0, image.height, image.width}; }

}  // namespace

void TrainConfig::validate() const {
    if (stage != "base" && stage != "finetune") throw ValidationError("stage must be 'base' or 'finetune'");
    if (k_shot < 1) throw ValidationError("k_shot must be positive");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("ccl.tau must be positive");
    if (!(lambdas.cls >= 0.0) || !(lambdas.reg >= 0.0) || !(lambdas.ccl >= 0.0))
        throw ValidationError("loss weights must be non-negative");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("augment.epsilon must lie in [0, 1]");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("augment.threshold must lie in (0, 1)");
    if (k_e < 1) throw ValidationError("augment.k_e must be positive");
    if (bank_clusters < 1) throw ValidationError("bank.clusters must be positive");
    parse_knowledge_case(knowledge_case);
    if (knowledge_clusters < 1) throw ValidationError("knowledge.clusters must be positive");
    if (!(base_learning_rate > 0.0) || !(learning_rate > 0.0)) throw ValidationError("learning rates must be positive");
    if (base_iterations < 0 || iterations < 0) throw ValidationError("iteration counts must be non-negative");
    if (base_batch_size < 1 || samples_per_category < 1) throw ValidationError("batch sizes must be positive");
    if (conv1_channels < 1 || conv2_channels < 1 || projection_dim < 1)
        throw ValidationError("model sizes must be positive");
}

ModelConfig TrainConfig::model_config(const DatasetConfig& data) const {
    ModelConfig m;
    m.image_size = data.image_size;
    m.conv1_channels = conv1_channels;
    m.conv2_channels = conv2_channels;
    m.num_categories = data.num_base + data.num_novel;
    m.projection_dim = projection_dim;
    m.validate();
    return m;
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& f : fields()) k.push_back(f.info);
        return k;
    }();
    return keys;
}

nlohmann::ordered_json config_to_json(const TrainConfig& config) {
    nlohmann::ordered_json j;
    for (const auto& f : fields()) j[f.info.key] = f.get(config);
    return j;
}

TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object with dotted keys");
    for (auto it = j.begin(); it != j.end(); ++it) find_field(it.key()).set(base, it.value());
    base.validate();
    return base;
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
    const Field& f = find_field(key);
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    f.set(config, parsed);
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError("config " + path.string() + " is not valid JSON");
    return config_from_json(j, std::move(base));
}

BaseTrainResult train_base(const TrainConfig& config, const Dataset& dataset) {
    config.validate();
    if (dataset.base.empty()) throw ValidationError("base training needs a non-empty base split");
    const ModelConfig model = config.model_config(dataset.config);
    Rng init(config.seed_init, kInitStream);
    Rng data(config.seed_data, kBaseDataStream);

    BaseTrainResult r{init_params(model, init), {}, 0.0};
    const std::vector<int> allowed = range(0, dataset.config.num_base);
    static constexpr ParamGroup kTrainable[] = {ParamGroup::Conv1Weight,      ParamGroup::Conv1Bias,
                                                ParamGroup::Conv2Weight,      ParamGroup::Conv2Bias,
                                                ParamGroup::ClassifierWeight, ParamGroup::ClassifierBias};
    const Eigen::VectorXd no_pooled = Eigen::VectorXd::Zero(model.embedding_dim());
    const int batch = config.base_batch_size;

    for (int it = 0; it < config.base_iterations; ++it) {
        std::vector<double> grads(r.params.values.size(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < batch; ++b) {
            const ToyImage& s = dataset.base[data.index(dataset.base.size())];
            const ForwardResult fwd = forward(r.params, s.image);
            const CrossEntropy ce = cross_entropy(fwd.scores, s.label, allowed);
            loss += ce.loss / batch;
            const BackwardResult bw = backward(r.params, fwd, ce.grad / batch, no_pooled);
            for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += bw.grads[i];
        }
        if (!std::isfinite(loss)) throw ValidationError("base training diverged at iteration " + std::to_string(it));
        r.losses.push_back(loss);
        sgd_step(r.params, grads, config.base_learning_rate, kTrainable);
    }
    require_finite(r.params, "base training");

    int correct = 0;
    for (const auto& s : dataset.base) {
        const ForwardResult fwd = forward(r.params, s.image);
        int best = allowed.front();
        for (int c : allowed)
            if (fwd.scores[c] > fwd.scores[best]) best = c;
        correct += best == s.label;
    }
    r.train_accuracy = static_cast<double>(correct) / static_cast<double>(dataset.base.size());
    return r;
}

std::vector<const ToyImage*> fine_tune_pool(const Dataset& dataset, int k_shot, int category) {
    std::vector<const ToyImage*> pool;
    const auto& split = dataset.is_novel(category) ? dataset.novel : dataset.base;
    for (const auto& s : split) {
        if (s.label != category) continue;
        pool.push_back(&s);
        if (static_cast<int>(pool.size()) == k_shot) break;
    }
    return pool;
}

FineTuneResult fine_tune(const ToyModelParams& params, const TrainConfig& config, const Dataset& dataset,
                         const KnowledgeMatrix& zeta) {
    config.validate();
    const int num_categories = dataset.num_categories();
    if (zeta.size() != num_categories)
        throw ValidationError("knowledge matrix covers " + std::to_string(zeta.size()) + " categories, dataset has " +
                              std::to_string(num_categories));
    if (params.config.num_categories != num_categories)
        throw ValidationError("model has " + std::to_string(params.config.num_categories) +
                              " outputs, dataset has " + std::to_string(num_categories) + " categories");
    if (config.k_shot != dataset.config.k_shot)
        throw ValidationError("k_shot " + std::to_string(config.k_shot) + " does not match the dataset's " +
                              std::to_string(dataset.config.k_shot));
    if (params.config.image_size != dataset.config.image_size)
        throw ValidationError("model image size does not match the dataset");

    std::vector<std::vector<const ToyImage*>> pools;
    for (int c = 0; c < num_categories; ++c) {
        pools.push_back(fine_tune_pool(dataset, config.k_shot, c));
        if (pools.back().empty())
            throw ValidationError("no fine-tuning samples for category '" + dataset.names[static_cast<std::size_t>(c)] + "'");
    }

    const KnowledgeMatrix weights =
        config.use_knowledge_matrix ? zeta : KnowledgeMatrix::all_ones(zeta.category_names());
    const bool augmenting = config.use_counterfactual && config.epsilon > 0.0;
    if (augmenting && !config.use_random_mask_baseline && config.k_e > num_categories - 1)
        throw ValidationError("augment.k_e must be at most the number of categories minus one");

    FineTuneResult r{params, {}, PrototypeBank(num_categories, config.k_shot, params.config.embedding_dim())};
    Rng data(config.seed_data, kFineDataStream);
    Rng aug(config.seed_augmentation, kAugmentStream);
    const std::uint64_t cluster_seed = config.seed_data ^ kClusterSeedSalt;

    std::vector<ParamGroup> trainable = {ParamGroup::ClassifierWeight, ParamGroup::ClassifierBias,
                                         ParamGroup::Projection};
    if (config.unfreeze_conv2) {
        trainable.push_back(ParamGroup::Conv2Weight);
        trainable.push_back(ParamGroup::Conv2Bias);
    }
    const AugmentOptions options{config.k_e, config.threshold};

    for (int it = 0; it < config.iterations; ++it) {
        IterationMetrics m;
        m.iteration = it;

        std::vector<Image> images;
        std::vector<int> labels;
        std::vector<bool> augmented;
        for (int c = 0; c < num_categories; ++c) {
            for (int s = 0; s < config.samples_per_category; ++s) {
                const auto& pool = pools[static_cast<std::size_t>(c)];
                const ToyImage& sample = *pool[data.index(pool.size())];
                // One draw per image whether or not augmentation is enabled keeps the stream aligned.
                const bool flip = aug.bernoulli(config.epsilon);
                if (augmenting && flip) {
                    const Box box = whole_image(sample.image);
                    if (config.use_random_mask_baseline) {
                        const ErasureMask mask = random_box_mask(box, aug);
                        m.erased_pixels += static_cast<int>((mask.grid.array() == 0).count());
                        images.push_back(apply_mask(sample.image, mask, aug.next(), c).image);
                    } else {
                        const ToyModelAttribution source(r.params);
                        AugmentTrace trace;
                        images.push_back(augment(sample.image, c, box, source, weights, options, aug, &trace).image);
                        m.erased_pixels += trace.erased_pixels;
                    }
                    augmented.push_back(true);
                    ++m.augmented;
                } else {
                    images.push_back(sample.image);
                    augmented.push_back(false);
                }
                labels.push_back(c);
            }
        }
        const int n = static_cast<int>(images.size());
        m.batch_size = n;

        std::vector<ForwardResult> fwds;
        fwds.reserve(images.size());
        for (const auto& img : images) fwds.push_back(forward(r.params, img));
        const Eigen::MatrixXd pooled = pooled_matrix(fwds);

        LossParts parts;
        std::vector<CrossEntropy> ces;
        for (int i = 0; i < n; ++i) {
            ces.push_back(cross_entropy(fwds[static_cast<std::size_t>(i)].scores, labels[static_cast<std::size_t>(i)]));
            parts.cls += ces.back().loss / n;
        }

        Eigen::MatrixXd grad_pooled = Eigen::MatrixXd::Zero(n, pooled.cols());
        Eigen::MatrixXd grad_projection;
        if (config.use_ccl) {
            for (int i = 0; i < n; ++i) {
                const auto before = r.bank.accepted(labels[static_cast<std::size_t>(i)]);
                r.bank.push(labels[static_cast<std::size_t>(i)], pooled.row(i).transpose(), augmented[static_cast<std::size_t>(i)]);
                m.bank_accepted += static_cast<int>(r.bank.accepted(labels[static_cast<std::size_t>(i)]) - before);
            }
            const PrototypeCenters protos =
                config.use_clustering ? r.bank.centers(config.bank_clusters, cluster_seed) : r.bank.entries();
            m.prototypes = static_cast<int>(protos.labels.size());
            const Eigen::MatrixXd w = r.params.projection_weights();
            const Projection proj = project(w, pooled, config.normalize_embeddings);
            const Projection anchors = project(w, protos.centers, config.normalize_embeddings);
            const CclResult ccl = ccl_grad(proj.embeddings, labels, anchors.embeddings, protos.labels, weights, config.tau);
            parts.ccl = ccl.loss;
            m.ccl_included = ccl.included;
            const ProjectionGradient pg =
                project_backward(w, pooled, proj, config.lambdas.ccl * ccl.grad_features);
            grad_pooled = pg.features;
            grad_projection = pg.weights;
        }
        m.loss = total_loss(parts, config.lambdas);

        std::vector<double> grads(r.params.values.size(), 0.0);
        for (int i = 0; i < n; ++i) {
            const auto& ce = ces[static_cast<std::size_t>(i)];
            const BackwardResult bw = backward(r.params, fwds[static_cast<std::size_t>(i)],
                                               config.lambdas.cls * ce.grad / n, grad_pooled.row(i).transpose(), false);
            for (std::size_t k = 0; k < grads.size(); ++k) grads[k] += bw.grads[k];
        }
        if (grad_projection.size() > 0) {
            // Row-major out_dim x d, matching the flat parameter layout.
            const auto off = r.params.offset(ParamGroup::Projection);
            for (Eigen::Index a = 0; a < grad_projection.rows(); ++a)
                for (Eigen::Index b = 0; b < grad_projection.cols(); ++b)
                    grads[off + static_cast<std::size_t>(a * grad_projection.cols() + b)] += grad_projection(a, b);
        }
        sgd_step(r.params, grads, config.learning_rate, trainable);
        r.metrics.iterations.push_back(m);
    }
    require_finite(r.params, "fine-tuning");
    r.metrics.final = evaluate(r.params, dataset);
    return r;
}

double separability_margin(const Eigen::MatrixXd& embeddings, std::span<const int> labels) {
    if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
        throw ValidationError("separability: label count does not match embeddings");
    Eigen::MatrixXd unit = embeddings;
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
        const double norm = unit.row(i).norm();
        if (norm == 0.0) throw ValidationError("separability: zero embedding at row " + std::to_string(i));
        unit.row(i) /= norm;
    }
    const Eigen::MatrixXd gram = unit * unit.transpose();
    double intra = 0.0, inter = 0.0;
    long n_intra = 0, n_inter = 0;
    for (Eigen::Index i = 0; i < gram.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < gram.cols(); ++j) {
            if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
                intra += gram(i, j);
                ++n_intra;
            } else {
                inter += gram(i, j);
                ++n_inter;
            }
        }
    }
    return (n_intra ? intra / static_cast<double>(n_intra) : 0.0) - (n_inter ? inter / static_cast<double>(n_inter) : 0.0);
}

EvalMetrics evaluate(const ToyModelParams& params, const Dataset& dataset) {
    const int num_categories = dataset.num_categories();
    EvalMetrics e;
    std::vector<int> correct(static_cast<std::size_t>(num_categories), 0);
    std::vector<int> total(static_cast<std::size_t>(num_categories), 0);
    Eigen::MatrixXd pooled(static_cast<Eigen::Index>(dataset.test.size()), params.config.embedding_dim());
    std::vector<int> labels;
    for (std::size_t i = 0; i < dataset.test.size(); ++i) {
        const ToyImage& s = dataset.test[i];
        const ForwardResult fwd = forward(params, s.image);
        Eigen::Index best = 0;
        fwd.scores.maxCoeff(&best);
        ++total[static_cast<std::size_t>(s.label)];
        correct[static_cast<std::size_t>(s.label)] += best == s.label;
        pooled.row(static_cast<Eigen::Index>(i)) = fwd.pooled.transpose();
        labels.push_back(s.label);
    }
    double base_sum = 0.0, novel_sum = 0.0;
    int n_base = 0, n_novel = 0, all_correct = 0, all_total = 0;
    for (int c = 0; c < num_categories; ++c) {
        const auto idx = static_cast<std::size_t>(c);
        const double acc = total[idx] ? static_cast<double>(correct[idx]) / total[idx] : 0.0;
        e.per_class_accuracy.push_back(acc);
        all_correct += correct[idx];
        all_total += total[idx];
        if (!total[idx]) continue;
        if (dataset.is_novel(c)) {
            novel_sum += acc;
            ++n_novel;
        } else {
            base_sum += acc;
            ++n_base;
        }
    }
    e.base_accuracy = n_base ? base_sum / n_base : 0.0;
    e.novel_accuracy = n_novel ? novel_sum / n_novel : 0.0;
    e.overall_accuracy = all_total ? static_cast<double>(all_correct) / all_total : 0.0;

    if (pooled.rows() >= 2) {
        const Eigen::MatrixXd w = params.projection_weights();
        Eigen::MatrixXd z = pooled * w.transpose();
        bool any_zero = false;
        for (Eigen::Index i = 0; i < z.rows(); ++i) any_zero = any_zero || z.row(i).norm() == 0.0;
        e.separability = any_zero ? 0.0 : separability_margin(z, labels);
    }
    return e;
}

KnowledgeMatrix dataset_knowledge(const Dataset& dataset, KnowledgeCase which, const ToyModelParams* params,
                                  int clusters, std::uint64_t seed) {
    KnowledgeInputs in;
    in.category_names = dataset.names;
    in.clusters = clusters;
    in.seed = seed;
    for (int c = 0; c < dataset.num_categories(); ++c) {
        in.labels[c] = dataset.attributes[static_cast<std::size_t>(c)];
        if (!dataset.is_novel(c)) in.base_categories.insert(c);
    }
    const bool needs_embeddings = which == KnowledgeCase::Embedding || which == KnowledgeCase::Mixed;
    if (needs_embeddings) {
        if (!params) throw ValidationError("embedding-based knowledge needs a trained model");
        std::map<int, std::vector<Eigen::VectorXd>> rows;
        for (const auto& s : dataset.base) rows[s.label].push_back(forward(*params, s.image).pooled);
        if (which == KnowledgeCase::Embedding)
            for (const auto& s : dataset.novel) rows[s.label].push_back(forward(*params, s.image).pooled);
        for (auto& [c, list] : rows) {
            CategoryEmbeddingSet set;
            set.category_id = c;
            set.embeddings.resize(static_cast<Eigen::Index>(list.size()), list.front().size());
            for (std::size_t i = 0; i < list.size(); ++i) set.embeddings.row(static_cast<Eigen::Index>(i)) = list[i].transpose();
            in.embeddings[c] = std::move(set);
        }
    }
    return build_knowledge_matrix(which, in);
}

std::string metrics_line(const IterationMetrics& m) {
    nlohmann::ordered_json j;
    j["iteration"] = m.iteration;
    j["total"] = m.loss.total;
    j["rpn"] = m.loss.parts.rpn;
    j["cls"] = m.loss.parts.cls;
    j["reg"] = m.loss.parts.reg;
    j["ccl"] = m.loss.parts.ccl;
    j["lambda_cls"] = m.loss.lambdas.cls;
    j["lambda_reg"] = m.loss.lambdas.reg;
    j["lambda_ccl"] = m.loss.lambdas.ccl;
    j["batch"] = m.batch_size;
    j["augmented"] = m.augmented;
    j["erased_pixels"] = m.erased_pixels;
    j["bank_accepted"] = m.bank_accepted;
    j["ccl_included"] = m.ccl_included;
    j["prototypes"] = m.prototypes;
    return j.dump();
}

nlohmann::ordered_json eval_to_json(const EvalMetrics& m, const Dataset& dataset) {
    nlohmann::ordered_json j;
    j["base_accuracy"] = m.base_accuracy;
    j["novel_accuracy"] = m.novel_accuracy;
    j["overall_accuracy"] = m.overall_accuracy;
    j["separability"] = m.separability;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < m.per_class_accuracy.size(); ++c)
        per[c < dataset.names.size() ? dataset.names[c] : std::to_string(c)] = m.per_class_accuracy[c];
    j["per_class_accuracy"] = per;
    return j;
}

void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<IterationMetrics>& metrics) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& m : metrics) out << metrics_line(m) << '\n';
}

}  // namespace fsrl
