#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace fsrl {

struct KMeansOptions {
    int max_iterations = 300;
    // Stop when the relative change of the within-cluster SSE drops below this.
    double tolerance = 1e-8;
};

struct KMeansResult {
    Eigen::MatrixXd centers;          // K x d
    Eigen::VectorXi assignment;       // one cluster index per input row
    double sse = 0.0;
    int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Rows of `points` are samples.
// Output depends only on (points, k, seed); K=1 yields the arithmetic mean.
// Throws ValidationError when there are fewer rows than k.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& options = {});

}  // namespace fsrl
