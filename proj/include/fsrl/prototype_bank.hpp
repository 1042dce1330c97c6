#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <filesystem>
#include <vector>

namespace fsrl {

// Cluster centers of the bank contents, rows grouped by category in ascending id order.
struct PrototypeCenters {
    Eigen::MatrixXd centers;
    std::vector<int> labels;
};

// Per-category FIFO of ground-truth embeddings, capped at 2k entries per category.
class PrototypeBank {
public:
    PrototypeBank(int num_categories, int k_shot, int dim);

    // Augmented samples leave the bank untouched. Past capacity, the oldest entry is evicted.
    void push(int category, const Eigen::VectorXd& embedding, bool is_augmented);

    // Per-category k-means with K = clusters (mean when clusters == 1). Categories holding
    // fewer than `clusters` entries contribute their mean; empty categories are omitted.
    PrototypeCenters centers(int clusters, std::uint64_t seed) const;

    // Every stored entry as its own prototype.
    PrototypeCenters entries() const;

    int num_categories() const { return static_cast<int>(queues_.size()); }
    int capacity() const { return capacity_; }
    int dim() const { return dim_; }
    int size(int category) const { return static_cast<int>(queues_.at(static_cast<std::size_t>(category)).size()); }
    const std::deque<Eigen::VectorXd>& queue(int category) const { return queues_.at(static_cast<std::size_t>(category)); }

    // Lifetime insertion counter per category.
    std::uint64_t accepted(int category) const { return accepted_.at(static_cast<std::size_t>(category)); }

    // Checkpoint: <stem>.fmat holds all entries (grouped by category, oldest first) and
    // <stem>.json the index {capacity, dim, categories: [{id, count, accepted}]}.
    void save(const std::filesystem::path& stem) const;
    static PrototypeBank load(const std::filesystem::path& stem);

    bool operator==(const PrototypeBank& other) const;

private:
    int capacity_;
    int dim_;
    std::vector<std::deque<Eigen::VectorXd>> queues_;
    std::vector<std::uint64_t> accepted_;
};

}  // namespace fsrl
