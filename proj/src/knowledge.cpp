#include "fsrl/knowledge.hpp"

#include "fsrl/errors.hpp"
#include "fsrl/kmeans.hpp"
#include "fsrl/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fsrl {

namespace {

using ordered_json = nlohmann::ordered_json;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const std::string& what) {
    if (a.size() != b.size())
        throw ValidationError(what + ": dimension mismatch " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw ValidationError(what + ": zero-norm vector");
    return a.dot(b) / (na * nb);
}

void check_name(const std::string& name) {
    if (name.empty()) throw ValidationError("empty category name");
    if (name.find_first_of(",\"\r\n") != std::string::npos)
        throw ValidationError("category name '" + name + "' contains a comma, quote or newline");
}

std::string join_ids(const std::vector<int>& ids, const std::vector<std::string>& names) {
    std::string out;
    for (int id : ids) {
        if (!out.empty()) out += ", ";
        out += id < static_cast<int>(names.size()) ? names[id] : std::to_string(id);
    }
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

int AttributeLabelVector::set_count() const {
    return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

void TextEmbeddingTable::validate() const {
    auto check = [](const Eigen::VectorXd& v, const std::string& what) {
        if (v.size() != kWordVectorDim)
            throw ValidationError(what + " has dimension " + std::to_string(v.size()) + ", expected " +
                                  std::to_string(kWordVectorDim));
    };
    for (const auto& [id, v] : category_vectors) check(v, "word vector of category " + std::to_string(id));
    for (const auto& [id, v] : attribute_vectors) check(v, "word vector of attribute " + std::to_string(id));
    if (null_vector) check(*null_vector, "null word vector");
}

KnowledgeMatrix::KnowledgeMatrix(Eigen::MatrixXd values, std::vector<std::string> category_names)
    : values_(std::move(values)), names_(std::move(category_names)) {
    const Eigen::Index c = values_.rows();
    if (values_.cols() != c) throw ValidationError("knowledge matrix must be square");
    if (static_cast<Eigen::Index>(names_.size()) != c)
        throw ValidationError("knowledge matrix has " + std::to_string(c) + " rows but " +
                              std::to_string(names_.size()) + " category names");
    for (const auto& n : names_) check_name(n);
    for (Eigen::Index i = 0; i < c; ++i) {
        if (values_(i, i) != 1.0) throw ValidationError("knowledge matrix diagonal entry " + std::to_string(i) + " is not 1");
        for (Eigen::Index j = 0; j < c; ++j) {
            const double v = values_(i, j);
            if (!(v >= 0.0 && v <= 1.0))
                throw ValidationError("knowledge matrix entry (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") outside [0,1]");
            if (v != values_(j, i))
                throw ValidationError("knowledge matrix is not symmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
        }
    }
}

KnowledgeMatrix KnowledgeMatrix::all_ones(std::vector<std::string> category_names) {
    const auto c = static_cast<Eigen::Index>(category_names.size());
    return KnowledgeMatrix(Eigen::MatrixXd::Ones(c, c), std::move(category_names));
}

void KnowledgeMatrix::save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < names_.size(); ++i) out << (i ? "," : "") << names_[i];
    out << '\n';
    for (Eigen::Index r = 0; r < values_.rows(); ++r) {
        for (Eigen::Index c = 0; c < values_.cols(); ++c) out << (c ? "," : "") << format_double(values_(r, c));
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

KnowledgeMatrix KnowledgeMatrix::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": missing header row");
    std::vector<std::string> names;
    {
        std::istringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) names.push_back(trim(cell));
    }
    const auto c = static_cast<Eigen::Index>(names.size());
    Eigen::MatrixXd values(c, c);
    Eigen::Index r = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (r >= c) throw IoError(path.string() + ": more rows than categories");
        std::istringstream row(line);
        std::string cell;
        Eigen::Index col = 0;
        while (std::getline(row, cell, ',')) {
            if (col >= c) throw IoError(path.string() + ": row " + std::to_string(r + 1) + " too long");
            values(r, col++) = parse_double(cell);
        }
        if (col != c) throw IoError(path.string() + ": row " + std::to_string(r + 1) + " too short");
        ++r;
    }
    if (r != c) throw IoError(path.string() + ": expected " + std::to_string(c) + " rows, got " + std::to_string(r));
    return KnowledgeMatrix(std::move(values), std::move(names));
}

Eigen::MatrixXd cluster_category_embeddings(const CategoryEmbeddingSet& set, int k, std::uint64_t seed) {
    if (set.embeddings.rows() < k)
        throw ValidationError("category " + std::to_string(set.category_id) + " has " +
                              std::to_string(set.embeddings.rows()) + " embeddings, fewer than K=" + std::to_string(k));
    return kmeans(set.embeddings, k, seed).centers;
}

double embedding_similarity(const Eigen::MatrixXd& centers_a, const Eigen::MatrixXd& centers_b) {
    if (centers_a.rows() != centers_b.rows() || centers_a.cols() != centers_b.cols() || centers_a.rows() == 0)
        throw ValidationError("embedding similarity: center matrices must both be K x d and nonempty");
    for (const auto* m : {&centers_a, &centers_b}) {
        for (Eigen::Index i = 0; i < m->rows(); ++i) {
            if (m->row(i).norm() == 0.0)
                throw ValidationError(std::string("embedding similarity: zero-norm center row ") + std::to_string(i) +
                                      (m == &centers_a ? " of first argument" : " of second argument"));
        }
    }
    // Sum of pairwise cosines == (sum of unit rows of a) . (sum of unit rows of b); this form is
    // bitwise symmetric under swapping the arguments.
    const Eigen::Index k = centers_a.rows();
    const Eigen::RowVectorXd sa = centers_a.rowwise().normalized().colwise().sum();
    const Eigen::RowVectorXd sb = centers_b.rowwise().normalized().colwise().sum();
    return clamp01(sa.dot(sb) / static_cast<double>(k * k));
}

double label_similarity(const AttributeLabelVector& a, const AttributeLabelVector& b) {
    if (a.bits.size() != b.bits.size())
        throw ValidationError("label similarity: attribute vectors of categories " + std::to_string(a.category_id) +
                              " and " + std::to_string(b.category_id) + " differ in length");
    const int na = a.set_count();
    const int nb = b.set_count();
    if (na == 0 || nb == 0)
        throw ValidationError("label similarity: category " + std::to_string(na == 0 ? a.category_id : b.category_id) +
                              " has no attributes");
    int dot = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) dot += a.bits[i] & b.bits[i];
    return static_cast<double>(dot) / std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
}

double text_similarity_category(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2) {
    return clamp01(cosine(e1, e2, "category word similarity"));
}

double text_similarity_attribute(const AttributeLabelVector& a, const AttributeLabelVector& b,
                                 const TextEmbeddingTable& table) {
    if (a.bits.size() != b.bits.size())
        throw ValidationError("attribute word similarity: label vectors differ in length");
    if (!table.null_vector) throw ValidationError("attribute word similarity: text table has no null vector");
    const Eigen::VectorXd& null_vec = *table.null_vector;

    auto slot = [&](const AttributeLabelVector& v, std::size_t i) -> const Eigen::VectorXd& {
        if (!v.bits[i]) return null_vec;
        auto it = table.attribute_vectors.find(static_cast<int>(i));
        if (it == table.attribute_vectors.end())
            throw ValidationError("attribute word similarity: missing word vector for attribute " + std::to_string(i));
        if (it->second.size() != null_vec.size())
            throw ValidationError("attribute word similarity: attribute " + std::to_string(i) +
                                  " vector dimension differs from null vector");
        return it->second;
    };

    double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const Eigen::VectorXd& va = slot(a, i);
        const Eigen::VectorXd& vb = slot(b, i);
        dot += va.dot(vb);
        norm_a += va.squaredNorm();
        norm_b += vb.squaredNorm();
    }
    if (norm_a == 0.0 || norm_b == 0.0) throw ValidationError("attribute word similarity: zero-norm feature");
    return clamp01(dot / (std::sqrt(norm_a) * std::sqrt(norm_b)));
}

KnowledgeCase parse_knowledge_case(int value) {
    if (value < 1 || value > 5) throw ValidationError("knowledge case must be 1..5, got " + std::to_string(value));
    return static_cast<KnowledgeCase>(value);
}

KnowledgeMatrix build_knowledge_matrix(KnowledgeCase which, const KnowledgeInputs& in) {
    const int c = static_cast<int>(in.category_names.size());
    if (c == 0) throw ValidationError("knowledge matrix needs at least one category");

    const bool need_embeddings = which == KnowledgeCase::Embedding || which == KnowledgeCase::Mixed;
    const bool need_labels =
        which == KnowledgeCase::Label || which == KnowledgeCase::Mixed || which == KnowledgeCase::AttributeWord;

    const int base_count = static_cast<int>(in.base_categories.size());
    // Case 3 reads embeddings only for base-base pairs and labels for every other pair.
    auto uses_embeddings = [&](int id) {
        if (which == KnowledgeCase::Mixed) return in.base_categories.count(id) > 0 && base_count > 1;
        return which == KnowledgeCase::Embedding;
    };
    auto uses_labels = [&](int id) {
        if (which == KnowledgeCase::Mixed) return in.base_categories.count(id) == 0 || base_count < c;
        return need_labels;
    };

    if (which == KnowledgeCase::Mixed) {
        for (int id : in.base_categories) {
            if (id < 0 || id >= c) throw ValidationError("base category id " + std::to_string(id) + " out of range");
        }
    }

    std::vector<int> missing;
    for (int id = 0; id < c; ++id) {
        bool ok = true;
        if (need_embeddings && uses_embeddings(id)) {
            auto it = in.embeddings.find(id);
            ok = ok && it != in.embeddings.end() && it->second.embeddings.rows() >= in.clusters;
        }
        if (need_labels && uses_labels(id)) ok = ok && in.labels.count(id) > 0;
        if (which == KnowledgeCase::CategoryWord) ok = ok && in.text && in.text->category_vectors.count(id) > 0;
        if (!ok) missing.push_back(id);
    }
    if (!missing.empty())
        throw ValidationError("knowledge case " + std::to_string(static_cast<int>(which)) +
                              ": missing inputs for categories: " + join_ids(missing, in.category_names));
    if ((which == KnowledgeCase::CategoryWord || which == KnowledgeCase::AttributeWord) && !in.text)
        throw ValidationError("knowledge case " + std::to_string(static_cast<int>(which)) + ": no text table");
    if (in.text) in.text->validate();

    std::map<int, Eigen::MatrixXd> centers;
    if (need_embeddings) {
        for (int id = 0; id < c; ++id) {
            if (!uses_embeddings(id)) continue;
            const std::uint64_t seed = in.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(id + 1);
            centers.emplace(id, cluster_category_embeddings(in.embeddings.at(id), in.clusters, seed));
        }
    }

    Eigen::MatrixXd values = Eigen::MatrixXd::Identity(c, c);
    for (int i = 0; i < c; ++i) {
        for (int j = i + 1; j < c; ++j) {
            double s = 0.0;
            switch (which) {
                case KnowledgeCase::Embedding:
                    s = embedding_similarity(centers.at(i), centers.at(j));
                    break;
                case KnowledgeCase::Label:
                    s = label_similarity(in.labels.at(i), in.labels.at(j));
                    break;
                case KnowledgeCase::Mixed:
                    if (in.base_categories.count(i) && in.base_categories.count(j))
                        s = embedding_similarity(centers.at(i), centers.at(j));
                    else
                        s = label_similarity(in.labels.at(i), in.labels.at(j));
                    break;
                case KnowledgeCase::CategoryWord:
                    s = text_similarity_category(in.text->category_vectors.at(i), in.text->category_vectors.at(j));
                    break;
                case KnowledgeCase::AttributeWord:
                    s = text_similarity_attribute(in.labels.at(i), in.labels.at(j), *in.text);
                    break;
            }
            values(i, j) = s;
            values(j, i) = s;
        }
    }
    return KnowledgeMatrix(std::move(values), in.category_names);
}

std::vector<int> top_counter_categories(const KnowledgeMatrix& zeta, int category, int k_e) {
    const int c = zeta.size();
    if (category < 0 || category >= c) throw ValidationError("counter categories: category id out of range");
    if (k_e < 1 || k_e >= c)
        throw ValidationError("counter categories: k_e=" + std::to_string(k_e) + " must be in [1, " +
                              std::to_string(c - 1) + "]");
    std::vector<int> others;
    for (int j = 0; j < c; ++j)
        if (j != category) others.push_back(j);
    std::stable_sort(others.begin(), others.end(),
                     [&](int a, int b) { return zeta(category, a) > zeta(category, b); });
    others.resize(static_cast<std::size_t>(k_e));
    return others;
}

AttributeLabelFile load_attribute_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw ValidationError(path.string() + ": expected a JSON object of label vectors");

    AttributeLabelFile file;
    std::size_t width = 0;
    for (const auto& [name, arr] : doc.items()) {
        check_name(name);
        if (!arr.is_array()) throw ValidationError("attribute labels of '" + name + "' must be an array");
        AttributeLabelVector v;
        v.category_id = static_cast<int>(file.names.size());
        for (const auto& bit : arr) {
            if (!bit.is_number_integer() || (bit.get<int>() != 0 && bit.get<int>() != 1))
                throw ValidationError("attribute labels of '" + name + "' must be 0/1 integers");
            v.bits.push_back(static_cast<std::uint8_t>(bit.get<int>()));
        }
        if (file.names.empty()) width = v.bits.size();
        if (v.bits.size() != width)
            throw ValidationError("attribute labels of '" + name + "' have length " + std::to_string(v.bits.size()) +
                                  ", expected " + std::to_string(width));
        if (v.set_count() == 0) throw ValidationError("category '" + name + "' has no attributes set");
        file.names.push_back(name);
        file.labels.push_back(std::move(v));
    }
    return file;
}

void save_attribute_labels(const std::filesystem::path& path, const AttributeLabelFile& file) {
    ordered_json doc = ordered_json::object();
    for (std::size_t i = 0; i < file.names.size(); ++i) {
        ordered_json arr = ordered_json::array();
        for (auto b : file.labels[i].bits) arr.push_back(static_cast<int>(b));
        doc[file.names[i]] = arr;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump() << '\n';
}

namespace {

ordered_json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

int index_of(const std::vector<std::string>& names, const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

}  // namespace

std::map<int, CategoryEmbeddingSet> load_embedding_sets(const std::filesystem::path& manifest,
                                                        const std::vector<std::string>& names) {
    const ordered_json doc = read_json(manifest);
    if (!doc.contains("categories") || !doc["categories"].is_object())
        throw ValidationError(manifest.string() + ": missing \"categories\" object");
    std::map<int, CategoryEmbeddingSet> sets;
    std::optional<Eigen::Index> dim;
    for (const auto& [name, rel] : doc["categories"].items()) {
        const int id = index_of(names, name);
        if (id < 0) throw ValidationError(manifest.string() + ": unknown category '" + name + "'");
        CategoryEmbeddingSet set;
        set.category_id = id;
        set.embeddings = read_matrix(manifest.parent_path() / rel.get<std::string>());
        if (dim && set.embeddings.cols() != *dim)
            throw ValidationError("embeddings of '" + name + "' have dimension " +
                                  std::to_string(set.embeddings.cols()) + ", expected " + std::to_string(*dim));
        dim = set.embeddings.cols();
        sets.emplace(id, std::move(set));
    }
    return sets;
}

TextEmbeddingTable load_text_table(const std::filesystem::path& manifest, const std::vector<std::string>& names) {
    const ordered_json doc = read_json(manifest);
    const auto base = manifest.parent_path();
    TextEmbeddingTable table;
    if (doc.contains("category_vectors")) {
        const auto order = doc.at("category_names").get<std::vector<std::string>>();
        const Eigen::MatrixXd m = read_matrix(base / doc["category_vectors"].get<std::string>());
        if (m.rows() != static_cast<Eigen::Index>(order.size()))
            throw ValidationError(manifest.string() + ": category_vectors row count differs from category_names");
        for (std::size_t r = 0; r < order.size(); ++r) {
            const int id = index_of(names, order[r]);
            if (id >= 0) table.category_vectors.emplace(id, m.row(static_cast<Eigen::Index>(r)).transpose());
        }
    }
    if (doc.contains("attribute_vectors")) {
        const Eigen::MatrixXd m = read_matrix(base / doc["attribute_vectors"].get<std::string>());
        for (Eigen::Index r = 0; r < m.rows(); ++r) table.attribute_vectors.emplace(static_cast<int>(r), m.row(r).transpose());
    }
    if (doc.contains("null_vector")) {
        const Eigen::MatrixXd m = read_matrix(base / doc["null_vector"].get<std::string>());
        if (m.rows() != 1) throw ValidationError(manifest.string() + ": null_vector must be a single row");
        table.null_vector = m.row(0).transpose();
    }
    table.validate();
    return table;
}

}  // namespace fsrl
