#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fsrl {

inline constexpr int kDefaultAttributeCount = 64;
inline constexpr int kWordVectorDim = 300;

// Binary attribute presence vector for one category.
struct AttributeLabelVector {
    int category_id = 0;
    std::vector<std::uint8_t> bits;

    int set_count() const;
};

// Attribute-model features of the images of one category.
struct CategoryEmbeddingSet {
    int category_id = 0;
    Eigen::MatrixXd embeddings;  // one row per image
};

// Word vectors for categories and attributes. `null_vector` stands in for absent attributes.
struct TextEmbeddingTable {
    std::map<int, Eigen::VectorXd> category_vectors;
    std::map<int, Eigen::VectorXd> attribute_vectors;  // keyed by attribute index
    std::optional<Eigen::VectorXd> null_vector;

    // Throws unless every vector has kWordVectorDim entries.
    void validate() const;
};

// C x C symmetric category similarity matrix with unit diagonal and entries in [0, 1].
// Instances are immutable once built.
class KnowledgeMatrix {
public:
    KnowledgeMatrix() = default;
    // Validates symmetry, unit diagonal and range; throws ValidationError otherwise.
    KnowledgeMatrix(Eigen::MatrixXd values, std::vector<std::string> category_names);

    static KnowledgeMatrix all_ones(std::vector<std::string> category_names);

    int size() const { return static_cast<int>(values_.rows()); }
    double operator()(int a, int b) const { return values_(a, b); }
    const Eigen::MatrixXd& values() const { return values_; }
    const std::vector<std::string>& category_names() const { return names_; }

    // CSV with a header row of category names; values use 17 significant digits.
    void save_csv(const std::filesystem::path& path) const;
    static KnowledgeMatrix load_csv(const std::filesystem::path& path);

private:
    Eigen::MatrixXd values_;
    std::vector<std::string> names_;
};

// K x d cluster centers of one category's embeddings (seeded k-means++).
Eigen::MatrixXd cluster_category_embeddings(const CategoryEmbeddingSet& set, int k, std::uint64_t seed);

// Mean pairwise cosine over all K^2 center pairs, clamped to [0, 1].
double embedding_similarity(const Eigen::MatrixXd& centers_a, const Eigen::MatrixXd& centers_b);

// Cosine of two binary attribute vectors.
double label_similarity(const AttributeLabelVector& a, const AttributeLabelVector& b);

// Clamped cosine of two category word vectors.
double text_similarity_category(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2);

// Clamped cosine of the flattened attribute-word features: slot i holds attribute i's word
// vector when bit i is set and the null vector otherwise.
double text_similarity_attribute(const AttributeLabelVector& a, const AttributeLabelVector& b,
                                 const TextEmbeddingTable& table);

enum class KnowledgeCase : int {
    Embedding = 1,       // cluster-center similarity everywhere
    Label = 2,           // attribute-label similarity everywhere
    Mixed = 3,           // embeddings between base categories, labels otherwise
    CategoryWord = 4,    // category word vectors
    AttributeWord = 5,   // attribute word vectors
};

KnowledgeCase parse_knowledge_case(int value);

struct KnowledgeInputs {
    std::vector<std::string> category_names;            // defines C and id order
    std::map<int, AttributeLabelVector> labels;          // cases 2, 3, 5
    std::map<int, CategoryEmbeddingSet> embeddings;      // cases 1, 3
    std::optional<TextEmbeddingTable> text;              // cases 4, 5
    std::set<int> base_categories;                       // case 3
    int clusters = 5;                                    // K for cases 1, 3
    std::uint64_t seed = 0;
};

KnowledgeMatrix build_knowledge_matrix(KnowledgeCase which, const KnowledgeInputs& inputs);

// The k_e categories most similar to c (c excluded), most similar first, ties by lower id.
std::vector<int> top_counter_categories(const KnowledgeMatrix& zeta, int category, int k_e);

// Attribute label file: JSON object {category_name: [0/1, ...]} in file order.
struct AttributeLabelFile {
    std::vector<std::string> names;
    std::vector<AttributeLabelVector> labels;
};
AttributeLabelFile load_attribute_labels(const std::filesystem::path& path);
void save_attribute_labels(const std::filesystem::path& path, const AttributeLabelFile& file);

// Embedding-set manifest: JSON {"categories": {name: "relative/path.fmat" | ".csv"}}.
std::map<int, CategoryEmbeddingSet> load_embedding_sets(const std::filesystem::path& manifest,
                                                        const std::vector<std::string>& names);

// Text table manifest: JSON {"category_names": [...], "category_vectors": path,
// "attribute_vectors": path, "null_vector": path}; matrices in the binary or CSV format.
// Returns the table keyed by position in `names`.
TextEmbeddingTable load_text_table(const std::filesystem::path& manifest, const std::vector<std::string>& names);

}  // namespace fsrl
