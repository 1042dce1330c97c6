#include "fsrl/prototype_bank.hpp"

#include "fsrl/errors.hpp"
#include "fsrl/kmeans.hpp"
#include "fsrl/matrix_io.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace fsrl {

PrototypeBank::PrototypeBank(int num_categories, int k_shot, int dim)
    : capacity_(2 * k_shot), dim_(dim) {
    if (num_categories < 1) throw ValidationError("prototype bank needs at least one category");
    if (k_shot < 1) throw ValidationError("prototype bank: k-shot must be positive");
    if (dim < 1) throw ValidationError("prototype bank: embedding dimension must be positive");
    queues_.resize(static_cast<std::size_t>(num_categories));
    accepted_.assign(static_cast<std::size_t>(num_categories), 0);
}

void PrototypeBank::push(int category, const Eigen::VectorXd& embedding, bool is_augmented) {
    if (category < 0 || category >= num_categories())
        throw ValidationError("prototype bank: category " + std::to_string(category) + " out of range");
    if (embedding.size() != dim_)
        throw ValidationError("prototype bank: embedding has dimension " + std::to_string(embedding.size()) +
                              ", expected " + std::to_string(dim_));
    if (is_augmented) return;
    const auto c = static_cast<std::size_t>(category);
    auto& q = queues_[c];
    if (static_cast<int>(q.size()) == capacity_) q.pop_front();
    q.push_back(embedding);
    ++accepted_[c];
}

PrototypeCenters PrototypeBank::centers(int clusters, std::uint64_t seed) const {
    if (clusters < 1) throw ValidationError("prototype centers: cluster count must be positive");
    PrototypeCenters out;
    std::vector<Eigen::MatrixXd> blocks;
    Eigen::Index rows = 0;
    for (int c = 0; c < num_categories(); ++c) {
        const auto& q = queue(c);
        if (q.empty()) continue;
        Eigen::MatrixXd points(static_cast<Eigen::Index>(q.size()), dim_);
        for (std::size_t i = 0; i < q.size(); ++i) points.row(static_cast<Eigen::Index>(i)) = q[i].transpose();
        const int k = static_cast<int>(q.size()) >= clusters ? clusters : 1;
        blocks.push_back(kmeans(points, k, seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(c + 1)).centers);
        out.labels.insert(out.labels.end(), static_cast<std::size_t>(k), c);
        rows += k;
    }
    out.centers.resize(rows, dim_);
    Eigen::Index r = 0;
    for (const auto& b : blocks) {
        out.centers.middleRows(r, b.rows()) = b;
        r += b.rows();
    }
    return out;
}

PrototypeCenters PrototypeBank::entries() const {
    PrototypeCenters out;
    Eigen::Index rows = 0;
    for (const auto& q : queues_) rows += static_cast<Eigen::Index>(q.size());
    out.centers.resize(rows, dim_);
    Eigen::Index r = 0;
    for (int c = 0; c < num_categories(); ++c) {
        for (const auto& e : queue(c)) {
            out.centers.row(r++) = e.transpose();
            out.labels.push_back(c);
        }
    }
    return out;
}

void PrototypeBank::save(const std::filesystem::path& stem) const {
    const PrototypeCenters all = entries();
    auto matrix_path = stem;
    matrix_path += ".fmat";
    write_matrix_binary(matrix_path, all.centers);

    nlohmann::ordered_json index;
    index["capacity"] = capacity_;
    index["dim"] = dim_;
    index["categories"] = nlohmann::ordered_json::array();
    for (int c = 0; c < num_categories(); ++c) {
        index["categories"].push_back({{"id", c},
                                       {"count", size(c)},
                                       {"accepted", accepted(c)}});
    }
    auto index_path = stem;
    index_path += ".json";
    std::ofstream out(index_path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + index_path.string() + " for writing");
    out << index.dump(2) << '\n';
}

PrototypeBank PrototypeBank::load(const std::filesystem::path& stem) {
    auto index_path = stem;
    index_path += ".json";
    std::ifstream in(index_path);
    if (!in) throw IoError("cannot open " + index_path.string());
    nlohmann::json index;
    try {
        index = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(index_path.string() + ": " + e.what());
    }
    const int capacity = index.at("capacity").get<int>();
    const int dim = index.at("dim").get<int>();
    const auto& cats = index.at("categories");
    if (capacity < 2 || capacity % 2 != 0) throw IoError(index_path.string() + ": capacity must be an even 2k");
    PrototypeBank bank(static_cast<int>(cats.size()), capacity / 2, dim);

    auto matrix_path = stem;
    matrix_path += ".fmat";
    const Eigen::MatrixXd all = read_matrix_binary(matrix_path);
    if (all.cols() != dim && all.rows() > 0) throw IoError(matrix_path.string() + ": dimension mismatch");
    Eigen::Index r = 0;
    for (const auto& entry : cats) {
        const int c = entry.at("id").get<int>();
        const int count = entry.at("count").get<int>();
        if (c < 0 || c >= bank.num_categories() || count > capacity || r + count > all.rows())
            throw IoError(index_path.string() + ": inconsistent category entry");
        auto& q = bank.queues_[static_cast<std::size_t>(c)];
        for (int i = 0; i < count; ++i) q.push_back(all.row(r++).transpose());
        bank.accepted_[static_cast<std::size_t>(c)] = entry.at("accepted").get<std::uint64_t>();
    }
    if (r != all.rows()) throw IoError(matrix_path.string() + ": more rows than the index declares");
    return bank;
}

bool PrototypeBank::operator==(const PrototypeBank& other) const {
    if (capacity_ != other.capacity_ || dim_ != other.dim_ || queues_.size() != other.queues_.size()) return false;
    if (accepted_ != other.accepted_) return false;
    for (std::size_t c = 0; c < queues_.size(); ++c) {
        if (queues_[c].size() != other.queues_[c].size()) return false;
        for (std::size_t i = 0; i < queues_[c].size(); ++i) {
            if (queues_[c][i] != other.queues_[c][i]) return false;
        }
    }
    return true;
}

}  // namespace fsrl
