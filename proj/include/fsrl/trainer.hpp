#pragma once

#include "fsrl/ccl_loss.hpp"
#include "fsrl/dataset.hpp"
#include "fsrl/knowledge.hpp"
#include "fsrl/prototype_bank.hpp"
#include "fsrl/toymodel.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fsrl {

struct TrainConfig {
    std::string stage = "finetune";  // "base" or "finetune"
    int k_shot = 5;

    double tau = kDefaultTemperature;
    bool normalize_embeddings = true;
    LossWeights lambdas;  // cls, reg, ccl

    double epsilon = kDefaultAugmentProbability;
    double threshold = kDefaultEraseThreshold;
    int k_e = kDefaultCounterCategories;

    int bank_clusters = 1;      // N^k
    int knowledge_case = 3;
    int knowledge_clusters = 5; // K

    std::uint64_t seed_data = 0;
    std::uint64_t seed_augmentation = 0;
    std::uint64_t seed_init = 0;

    double base_learning_rate = 0.1;
    int base_iterations = 1500;
    int base_batch_size = 16;

    double learning_rate = 0.05;
    int iterations = 200;
    int samples_per_category = 1;
    bool unfreeze_conv2 = true;

    int conv1_channels = 6;
    int conv2_channels = 12;
    int projection_dim = kProjectionDim;

    bool use_ccl = true;
    bool use_knowledge_matrix = true;
    bool use_clustering = true;
    bool use_counterfactual = true;
    bool use_random_mask_baseline = false;

    void validate() const;
    ModelConfig model_config(const DatasetConfig& data) const;
};

// Flat dotted-key view of TrainConfig, e.g. "ccl.tau" or "ablation.use_ccl".
struct ConfigKey {
    std::string key;
    std::string help;
};
const std::vector<ConfigKey>& config_keys();

nlohmann::ordered_json config_to_json(const TrainConfig& config);
// Applies the keys present in `j` on top of `base`; unknown keys and mistyped values are errors.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
// `value` is read as JSON when it parses (numbers, booleans), as a plain string otherwise.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

struct IterationMetrics {
    int iteration = 0;
    LossBreakdown loss;
    int batch_size = 0;
    int augmented = 0;       // samples replaced by their augmented version
    int erased_pixels = 0;   // pixels overwritten by augmentation, summed over the batch
    int bank_accepted = 0;   // embeddings stored in the bank this iteration
    int ccl_included = 0;    // proposals with a same-category prototype
    int prototypes = 0;
};

struct EvalMetrics {
    std::vector<double> per_class_accuracy;
    double base_accuracy = 0.0;   // mean over base categories
    double novel_accuracy = 0.0;  // mean over novel categories
    double overall_accuracy = 0.0;
    double separability = 0.0;    // mean intra-class cosine minus mean inter-class cosine
};

struct RunMetrics {
    std::vector<IterationMetrics> iterations;
    EvalMetrics final;
};

struct BaseTrainResult {
    ToyModelParams params;
    std::vector<double> losses;
    double train_accuracy = 0.0;
};

// Plain cross-entropy over the base categories only.
BaseTrainResult train_base(const TrainConfig& config, const Dataset& dataset);

struct FineTuneResult {
    ToyModelParams params;
    RunMetrics metrics;
    PrototypeBank bank;
};

// The fine-tuning set is the first k base samples of each base category plus the novel shots.
std::vector<const ToyImage*> fine_tune_pool(const Dataset& dataset, int k_shot, int category);

// Second stage: class-balanced batches, optional counterfactual augmentation, bank updates and
// the weighted sum of classification and contrastive losses. `zeta` must cover every category.
FineTuneResult fine_tune(const ToyModelParams& params, const TrainConfig& config, const Dataset& dataset,
                         const KnowledgeMatrix& zeta);

// Held-out accuracy on the test split and the separability of the projected test embeddings.
EvalMetrics evaluate(const ToyModelParams& params, const Dataset& dataset);

// Mean cosine over same-label pairs minus mean cosine over different-label pairs (rows need not be unit).
double separability_margin(const Eigen::MatrixXd& embeddings, std::span<const int> labels);

// Knowledge matrix from the dataset's attribute table; embedding cases use the pooled features
// of `params` on the base split.
KnowledgeMatrix dataset_knowledge(const Dataset& dataset, KnowledgeCase which, const ToyModelParams* params,
                                  int clusters, std::uint64_t seed);

std::string metrics_line(const IterationMetrics& m);
nlohmann::ordered_json eval_to_json(const EvalMetrics& m, const Dataset& dataset);
void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<IterationMetrics>& metrics);

}  // namespace fsrl
