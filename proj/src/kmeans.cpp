#include "fsrl/kmeans.hpp"

#include "fsrl/errors.hpp"
#include "fsrl/rng.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace fsrl {

namespace {

double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& points, int k, Rng& rng) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd centers(k, points.cols());
    centers.row(0) = points.row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n))));

    std::vector<double> nearest(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) nearest[i] = squared_distance(points, i, centers, 0);

    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : nearest) total += d;
        Eigen::Index chosen = n - 1;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += nearest[i];
                if (acc > target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            // Every point coincides with a chosen center; any row is as good as another.
            chosen = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
        }
        centers.row(c) = points.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(points, i, centers, c));
    }
    return centers;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& options) {
    if (k < 1) throw ValidationError("k-means: cluster count must be positive, got " + std::to_string(k));
    if (points.rows() < k)
        throw ValidationError("k-means: " + std::to_string(points.rows()) + " points for " + std::to_string(k) +
                              " clusters");

    const Eigen::Index n = points.rows();
    Rng rng(seed, 0x6b6d65616e73ULL);

    KMeansResult result;
    result.centers = seed_plus_plus(points, k, rng);
    result.assignment = Eigen::VectorXi::Zero(n);

    double previous_sse = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        result.iterations = iter;

        // Assignment step; ties go to the lowest cluster index.
        std::vector<double> dist(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (int c = 0; c < k; ++c) {
                const double d = squared_distance(points, i, result.centers, c);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            result.assignment[i] = best_c;
            dist[i] = best;
        }

        // Empty cluster: steal the point farthest from its current center.
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) ++counts[result.assignment[i]];
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            Eigen::Index far = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (counts[result.assignment[i]] > 1 && (far < 0 || dist[i] > dist[far])) far = i;
            }
            if (far < 0) break;
            --counts[result.assignment[far]];
            result.assignment[far] = c;
            counts[c] = 1;
            dist[far] = 0.0;
        }

        // Update step.
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
        for (Eigen::Index i = 0; i < n; ++i) sums.row(result.assignment[i]) += points.row(i);
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) result.centers.row(c) = sums.row(c) / static_cast<double>(counts[c]);
        }

        double sse = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) sse += squared_distance(points, i, result.centers, result.assignment[i]);
        result.sse = sse;

        const double change = previous_sse - sse;
        if (std::isfinite(previous_sse) && std::abs(change) <= options.tolerance * std::max(previous_sse, 1e-300)) break;
        if (sse == 0.0) break;
        previous_sse = sse;
    }
    return result;
}

}  // namespace fsrl
