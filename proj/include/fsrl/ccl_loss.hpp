#pragma once

#include "fsrl/knowledge.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace fsrl {

inline constexpr int kProjectionDim = 128;
inline constexpr double kDefaultTemperature = 0.2;

// One row of a projected batch.
struct ProjectedEmbedding {
    Eigen::VectorXd vector;
    int label = 0;
    bool is_augmented = false;
};

// Linear projection of a feature batch into the contrastive space.
struct Projection {
    Eigen::MatrixXd embeddings;  // N x out_dim, unit rows when normalized
    Eigen::VectorXd norms;       // pre-normalization row norms
    bool normalized = true;
};

// Rows of `features` are mapped by `weights` (out_dim x d) then L2-normalized when
// `normalize` is set. A zero row before normalization is an error.
Projection project(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& features, bool normalize = true);

std::vector<ProjectedEmbedding> to_embeddings(const Projection& projection, std::span<const int> labels,
                                              std::span<const bool> augmented);

struct ProjectionGradient {
    Eigen::MatrixXd weights;   // out_dim x d
    Eigen::MatrixXd features;  // N x d
};

// Pulls dL/d(embeddings) back through the normalization and the linear map.
ProjectionGradient project_backward(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& features,
                                    const Projection& projection, const Eigen::MatrixXd& grad_embeddings);

struct CclResult {
    double loss = 0.0;
    int included = 0;          // proposals whose category has at least one prototype
    bool no_proposals = false; // included == 0; loss is then defined as 0
    Eigen::MatrixXd grad_features;    // N x dim; rows of excluded proposals are zero
    Eigen::MatrixXd grad_prototypes;  // M x dim; identically zero (prototypes are constants)
};

// Contextual contrastive loss of proposals `features` (labels `feature_labels`) against
// prototypes (labels `prototype_labels`):
//   -1/N' sum_i log( sum_{j: y_j = y_i} exp(F_i.P_j/tau) / sum_j exp(zeta[y_i][y_j] F_i.P_j/tau) )
// Proposals without a same-category prototype are left out of the mean.
CclResult ccl_evaluate(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                       const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels,
                       const KnowledgeMatrix& zeta, double tau);

double ccl_loss(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels, const KnowledgeMatrix& zeta,
                double tau);

CclResult ccl_grad(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                   const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels,
                   const KnowledgeMatrix& zeta, double tau);

// The same loss with every negative weighted by 1.
CclResult prototype_contrastive_evaluate(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                                         const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels,
                                         double tau);

// Proposal-vs-proposal contrastive loss weighted by IoU, kept as a comparison baseline.
// Proposals whose label occurs once contribute nothing.
double cpe_loss(const Eigen::MatrixXd& features, std::span<const int> labels, std::span<const double> iou, double tau);

struct LossParts {
    double rpn = 0.0;
    double cls = 0.0;
    double reg = 0.0;
    double ccl = 0.0;
};

struct LossWeights {
    double cls = 1.0;
    double reg = 1.0;
    double ccl = 1.0;
};

struct LossBreakdown {
    LossParts parts;
    LossWeights lambdas;
    double total = 0.0;
};

// total = rpn + l1*cls + l2*reg + l3*ccl. Non-finite parts are rejected by name.
LossBreakdown total_loss(const LossParts& parts, const LossWeights& lambdas = {});

}  // namespace fsrl
