#include "fsrl/ccl_loss.hpp"

#include "fsrl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fsrl {

Projection project(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& features, bool normalize) {
    if (weights.cols() != features.cols())
        throw ValidationError("projection: weights take " + std::to_string(weights.cols()) +
                              "-dim inputs, features are " + std::to_string(features.cols()) + "-dim");
    Projection out;
    out.normalized = normalize;
    out.embeddings = features * weights.transpose();
    out.norms = out.embeddings.rowwise().norm();
    if (normalize) {
        for (Eigen::Index i = 0; i < out.embeddings.rows(); ++i) {
            if (out.norms[i] == 0.0)
                throw ValidationError("projection: row " + std::to_string(i) + " maps to the zero vector");
            out.embeddings.row(i) /= out.norms[i];
        }
    }
    return out;
}

std::vector<ProjectedEmbedding> to_embeddings(const Projection& projection, std::span<const int> labels,
                                              std::span<const bool> augmented) {
    const auto n = static_cast<std::size_t>(projection.embeddings.rows());
    if (labels.size() != n || augmented.size() != n)
        throw ValidationError("projected batch: label/flag count differs from row count");
    std::vector<ProjectedEmbedding> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].vector = projection.embeddings.row(static_cast<Eigen::Index>(i)).transpose();
        out[i].label = labels[i];
        out[i].is_augmented = augmented[i];
    }
    return out;
}

ProjectionGradient project_backward(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& features,
                                    const Projection& projection, const Eigen::MatrixXd& grad_embeddings) {
    Eigen::MatrixXd grad_raw = grad_embeddings;
    if (projection.normalized) {
        for (Eigen::Index i = 0; i < grad_raw.rows(); ++i) {
            const auto f = projection.embeddings.row(i);
            grad_raw.row(i) = (grad_embeddings.row(i) - f * f.dot(grad_embeddings.row(i))) / projection.norms[i];
        }
    }
    ProjectionGradient g;
    g.weights = grad_raw.transpose() * features;
    g.features = grad_raw * weights;
    return g;
}

namespace {

void check_batch(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                 const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels, int num_categories,
                 double tau) {
    if (!(tau > 0.0)) throw ValidationError("contrastive loss: temperature must be positive");
    if (static_cast<std::size_t>(features.rows()) != feature_labels.size())
        throw ValidationError("contrastive loss: feature label count differs from feature rows");
    if (static_cast<std::size_t>(prototypes.rows()) != prototype_labels.size())
        throw ValidationError("contrastive loss: prototype label count differs from prototype rows");
    if (prototypes.rows() > 0 && prototypes.cols() != features.cols())
        throw ValidationError("contrastive loss: features and prototypes differ in dimension");
    auto in_range = [&](int y) { return y >= 0 && (num_categories < 0 || y < num_categories); };
    for (int y : feature_labels)
        if (!in_range(y)) throw ValidationError("contrastive loss: feature label " + std::to_string(y) + " out of range");
    for (int y : prototype_labels)
        if (!in_range(y)) throw ValidationError("contrastive loss: prototype label " + std::to_string(y) + " out of range");
}

double log_sum_exp(const std::vector<double>& x) {
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

// Shared kernel; a null `zeta` weights every pair by 1.
CclResult contrastive_kernel(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                             const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels,
                             const Eigen::MatrixXd* zeta, double tau) {
    CclResult r;
    r.grad_features = Eigen::MatrixXd::Zero(features.rows(), features.cols());
    r.grad_prototypes = Eigen::MatrixXd::Zero(prototypes.rows(), prototypes.cols());

    const Eigen::Index m = prototypes.rows();
    std::vector<double> pos_logits, all_logits;
    double total = 0.0;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const int yi = feature_labels[static_cast<std::size_t>(i)];
        pos_logits.clear();
        all_logits.clear();
        for (Eigen::Index j = 0; j < m; ++j) {
            const int yj = prototype_labels[static_cast<std::size_t>(j)];
            const double s = features.row(i).dot(prototypes.row(j));
            const double w = zeta ? (*zeta)(yi, yj) : 1.0;
            all_logits.push_back(w * s / tau);
            if (yj == yi) pos_logits.push_back(s / tau);
        }
        if (pos_logits.empty()) continue;
        ++r.included;
        const double lse_pos = log_sum_exp(pos_logits);
        const double lse_all = log_sum_exp(all_logits);
        total += lse_all - lse_pos;

        // d/dF_i [lse_all - lse_pos]
        Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(features.cols());
        std::size_t p = 0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const int yj = prototype_labels[static_cast<std::size_t>(j)];
            const double w = zeta ? (*zeta)(yi, yj) : 1.0;
            g += (std::exp(all_logits[static_cast<std::size_t>(j)] - lse_all) * w / tau) * prototypes.row(j);
            if (yj == yi) g -= (std::exp(pos_logits[p++] - lse_pos) / tau) * prototypes.row(j);
        }
        r.grad_features.row(i) = g;
    }
    if (r.included == 0) {
        r.no_proposals = true;
        return r;
    }
    r.loss = total / static_cast<double>(r.included);
    r.grad_features /= static_cast<double>(r.included);
    return r;
}

}  // namespace

CclResult ccl_evaluate(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                       const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels,
                       const KnowledgeMatrix& zeta, double tau) {
    check_batch(features, feature_labels, prototypes, prototype_labels, zeta.size(), tau);
    return contrastive_kernel(features, feature_labels, prototypes, prototype_labels, &zeta.values(), tau);
}

double ccl_loss(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels, const KnowledgeMatrix& zeta,
                double tau) {
    return ccl_evaluate(features, feature_labels, prototypes, prototype_labels, zeta, tau).loss;
}

CclResult ccl_grad(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                   const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels,
                   const KnowledgeMatrix& zeta, double tau) {
    return ccl_evaluate(features, feature_labels, prototypes, prototype_labels, zeta, tau);
}

CclResult prototype_contrastive_evaluate(const Eigen::MatrixXd& features, std::span<const int> feature_labels,
                                         const Eigen::MatrixXd& prototypes, std::span<const int> prototype_labels,
                                         double tau) {
    check_batch(features, feature_labels, prototypes, prototype_labels, -1, tau);
    return contrastive_kernel(features, feature_labels, prototypes, prototype_labels, nullptr, tau);
}

double cpe_loss(const Eigen::MatrixXd& features, std::span<const int> labels, std::span<const double> iou, double tau) {
    if (!(tau > 0.0)) throw ValidationError("CPE loss: temperature must be positive");
    const Eigen::Index n = features.rows();
    if (n < 2) throw ValidationError("CPE loss: needs at least two proposals");
    if (labels.size() != static_cast<std::size_t>(n) || iou.size() != static_cast<std::size_t>(n))
        throw ValidationError("CPE loss: label/IoU count differs from feature rows");
    for (double u : iou)
        if (!(u >= 0.0 && u <= 1.0)) throw ValidationError("CPE loss: IoU score outside [0,1]");

    const Eigen::MatrixXd sim = features * features.transpose() / tau;
    double total = 0.0;
    std::vector<double> others;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int yi = labels[static_cast<std::size_t>(i)];
        const auto same = std::count(labels.begin(), labels.end(), yi);
        if (same < 2) continue;
        others.clear();
        for (Eigen::Index k = 0; k < n; ++k)
            if (k != i) others.push_back(sim(i, k));
        const double lse = log_sum_exp(others);
        double li = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i && labels[static_cast<std::size_t>(j)] == yi) li += sim(i, j) - lse;
        }
        total += iou[static_cast<std::size_t>(i)] * li / static_cast<double>(same - 1);
    }
    return -total / static_cast<double>(n);
}

LossBreakdown total_loss(const LossParts& parts, const LossWeights& lambdas) {
    const std::pair<const char*, double> named[] = {
        {"rpn", parts.rpn}, {"cls", parts.cls}, {"reg", parts.reg}, {"ccl", parts.ccl},
        {"lambda1", lambdas.cls}, {"lambda2", lambdas.reg}, {"lambda3", lambdas.ccl}};
    for (const auto& [name, v] : named)
        if (!std::isfinite(v)) throw ValidationError(std::string("loss part '") + name + "' is not finite");
    LossBreakdown b;
    b.parts = parts;
    b.lambdas = lambdas;
    b.total = parts.rpn + lambdas.cls * parts.cls + lambdas.reg * parts.reg + lambdas.ccl * parts.ccl;
    return b;
}

}  // namespace fsrl
