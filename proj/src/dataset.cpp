#include "fsrl/dataset.hpp"

#include "fsrl/errors.hpp"
#include "fsrl/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

namespace fsrl {

namespace {

struct Rgb {
    double r, g, b;
};

enum class Shape { Rect, Diagonal, AntiDiagonal, Ring, Plus, Checker };

struct Part {
    Shape shape;
    double y0, x0, y1, x1;  // bounding region in [0,1] image coordinates
    Rgb color;
};

// Attribute i draws kParts[i].
constexpr std::array<Part, kShapePartCount> kParts = {{
    {Shape::Rect, 0.08, 0.20, 0.24, 0.80, {220, 40, 40}},          // top bar
    {Shape::Rect, 0.76, 0.20, 0.92, 0.80, {40, 200, 60}},          // bottom bar
    {Shape::Rect, 0.20, 0.08, 0.80, 0.24, {50, 80, 230}},          // left bar
    {Shape::Rect, 0.20, 0.76, 0.80, 0.92, {230, 220, 40}},         // right bar
    {Shape::Rect, 0.37, 0.37, 0.63, 0.63, {240, 240, 240}},        // center square
    {Shape::Diagonal, 0.12, 0.12, 0.88, 0.88, {220, 50, 220}},     // main diagonal
    {Shape::AntiDiagonal, 0.12, 0.12, 0.88, 0.88, {40, 220, 220}}, // anti-diagonal
    {Shape::Ring, 0.25, 0.25, 0.75, 0.75, {240, 140, 30}},         // ring
    {Shape::Rect, 0.04, 0.04, 0.26, 0.26, {150, 150, 150}},        // top-left blob
    {Shape::Rect, 0.74, 0.74, 0.96, 0.96, {130, 50, 180}},         // bottom-right blob
    {Shape::Plus, 0.28, 0.28, 0.72, 0.72, {150, 240, 60}},         // plus
    {Shape::Checker, 0.30, 0.30, 0.70, 0.70, {250, 180, 200}},     // checker patch
}};

bool covers(const Part& p, double fy, double fx, int iy, int ix) {
    if (fy < p.y0 || fy > p.y1 || fx < p.x0 || fx > p.x1) return false;
    const double cy = (p.y0 + p.y1) / 2, cx = (p.x0 + p.x1) / 2;
    const double half = 0.07;
    switch (p.shape) {
        case Shape::Rect: return true;
        case Shape::Diagonal: return std::abs((fy - p.y0) - (fx - p.x0)) < half;
        case Shape::AntiDiagonal: return std::abs((fy - p.y0) - (p.x1 - fx)) < half;
        case Shape::Ring:
            return fy - p.y0 < 2 * half || p.y1 - fy < 2 * half || fx - p.x0 < 2 * half || p.x1 - fx < 2 * half;
        case Shape::Plus: return std::abs(fy - cy) < half || std::abs(fx - cx) < half;
        case Shape::Checker: return (iy + ix) % 2 == 0;
    }
    return false;
}

AttributeLabelVector bits_from_parts(int id, std::initializer_list<int> parts) {
    AttributeLabelVector v;
    v.category_id = id;
    v.bits.assign(kShapePartCount, 0);
    for (int p : parts) v.bits[static_cast<std::size_t>(p)] = 1;
    return v;
}

std::string category_name(int id, int num_base) {
    return id < num_base ? "base" + std::to_string(id) : "novel" + std::to_string(id - num_base);
}

Split parse_split(const std::string& s) {
    if (s == "base") return Split::Base;
    if (s == "novel") return Split::Novel;
    if (s == "test") return Split::Test;
    throw IoError("unknown split '" + s + "'");
}

}  // namespace

const char* to_string(Split split) {
    switch (split) {
        case Split::Base: return "base";
        case Split::Novel: return "novel";
        case Split::Test: return "test";
    }
    return "?";
}

AttributeLabelFile shipped_attribute_table() {
    const std::vector<std::initializer_list<int>> parts = {
        {0, 2, 4}, {1, 3, 4}, {5, 7, 8}, {6, 7, 9}, {0, 3, 10}, {1, 2, 11}, {4, 5, 6}, {8, 9, 10},
        {0, 2, 5},   // shares top bar + left bar with base0
        {1, 3, 6},   // shares bottom bar + right bar with base1
        {7, 8, 11},  // shares ring + top-left blob with base2
        {4, 9, 10},  // shares blob + plus with base7
    };
    AttributeLabelFile t;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        t.names.push_back(category_name(static_cast<int>(i), 8));
        t.labels.push_back(bits_from_parts(static_cast<int>(i), parts[i]));
    }
    return t;
}

AttributeLabelFile generated_attribute_table(int num_base, int num_novel) {
    std::vector<std::array<int, 3>> combos;
    for (int a = 0; a < kShapePartCount; ++a)
        for (int b = a + 1; b < kShapePartCount; ++b)
            for (int c = b + 1; c < kShapePartCount; ++c) combos.push_back({a, b, c});
    const int total = num_base + num_novel;
    if (total > static_cast<int>(combos.size()))
        throw ValidationError("at most " + std::to_string(combos.size()) + " toy categories are renderable");
    AttributeLabelFile t;
    for (int i = 0; i < total; ++i) {
        // 37 is coprime with the 220 combinations, so the picks are distinct.
        const auto& p = combos[static_cast<std::size_t>(i * 37) % combos.size()];
        t.names.push_back(category_name(i, num_base));
        t.labels.push_back(bits_from_parts(i, {p[0], p[1], p[2]}));
    }
    return t;
}

void validate_attribute_table(const AttributeLabelFile& table, int num_categories) {
    if (static_cast<int>(table.labels.size()) != num_categories || table.names.size() != table.labels.size())
        throw ValidationError("attribute table has " + std::to_string(table.labels.size()) + " categories, expected " +
                              std::to_string(num_categories));
    std::set<std::vector<std::uint8_t>> seen;
    for (std::size_t i = 0; i < table.labels.size(); ++i) {
        const auto& bits = table.labels[i].bits;
        if (bits.size() != table.labels.front().bits.size())
            throw ValidationError("attribute table: row '" + table.names[i] + "' has a different length");
        if (static_cast<int>(bits.size()) > kShapePartCount)
            throw ValidationError("attribute table declares " + std::to_string(bits.size()) +
                                  " attributes; only " + std::to_string(kShapePartCount) + " parts are renderable");
        if (table.labels[i].set_count() == 0)
            throw ValidationError("attribute table: category '" + table.names[i] + "' has no attributes");
        for (auto b : bits)
            if (b > 1) throw ValidationError("attribute table: non-binary entry in '" + table.names[i] + "'");
        if (!seen.insert(bits).second)
            throw ValidationError("attribute table: category '" + table.names[i] +
                                  "' duplicates another category's attributes");
    }
}

Image render_category(const std::vector<std::uint8_t>& attributes, const DatasetConfig& config, Rng& rng) {
    const int n = config.image_size;
    Image img(n, n, 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform() * 40.0);

    const int dy = config.jitter > 0 ? static_cast<int>(rng.index(static_cast<std::uint64_t>(2 * config.jitter + 1))) - config.jitter : 0;
    const int dx = config.jitter > 0 ? static_cast<int>(rng.index(static_cast<std::uint64_t>(2 * config.jitter + 1))) - config.jitter : 0;

    std::vector<int> parts;
    for (std::size_t i = 0; i < attributes.size(); ++i)
        if (attributes[i]) parts.push_back(static_cast<int>(i));
    std::vector<int> drawn;
    std::vector<double> strength;
    for (int p : parts) {
        const bool dropped = rng.bernoulli(config.part_dropout);
        const double s = rng.uniform(0.6, 1.0);
        if (!dropped) {
            drawn.push_back(p);
            strength.push_back(s);
        }
    }
    if (drawn.empty() && !parts.empty()) {
        drawn.push_back(parts[rng.index(parts.size())]);
        strength.push_back(1.0);
    }

    for (std::size_t d = 0; d < drawn.size(); ++d) {
        const Part& part = kParts[static_cast<std::size_t>(drawn[d])];
        const double s = strength[d];
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                const int sy = y - dy, sx = x - dx;
                const double fy = (sy + 0.5) / n, fx = (sx + 0.5) / n;
                if (!covers(part, fy, fx, sy, sx)) continue;
                img.at(y, x, 0) = static_cast<std::uint8_t>(std::lround(part.color.r * s));
                img.at(y, x, 1) = static_cast<std::uint8_t>(std::lround(part.color.g * s));
                img.at(y, x, 2) = static_cast<std::uint8_t>(std::lround(part.color.b * s));
            }
        }
    }
    if (config.noise > 0.0) {
        for (auto& p : img.pixels) {
            const double v = p + config.noise * rng.normal();
            p = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return img;
}

Dataset generate_dataset(const DatasetConfig& config) {
    if (config.num_base < 1) throw ValidationError("dataset: need at least one base category");
    if (config.num_novel < 0) throw ValidationError("dataset: negative novel category count");
    if (config.k_shot < 1) throw ValidationError("dataset: k-shot must be positive");
    if (config.base_per_category < 1 || config.test_per_category < 0)
        throw ValidationError("dataset: invalid per-category sample counts");
    if (config.image_size < 5) throw ValidationError("dataset: images must be at least 5 pixels wide");

    Dataset ds;
    ds.config = config;
    const int total = config.num_base + config.num_novel;
    AttributeLabelFile table = config.attributes;
    if (table.labels.empty())
        table = (config.num_base == 8 && config.num_novel == 4) ? shipped_attribute_table()
                                                                : generated_attribute_table(config.num_base, config.num_novel);
    validate_attribute_table(table, total);
    ds.config.attributes = table;
    ds.names = table.names;
    ds.attributes = table.labels;
    for (int i = 0; i < total; ++i) ds.attributes[static_cast<std::size_t>(i)].category_id = i;

    Rng rng(config.seed, 0x64617461ULL);
    auto make = [&](int c, Split split) {
        const auto& bits = ds.attributes[static_cast<std::size_t>(c)].bits;
        return ToyImage{render_category(bits, config, rng), c, split, bits};
    };
    for (int c = 0; c < config.num_base; ++c)
        for (int i = 0; i < config.base_per_category; ++i) ds.base.push_back(make(c, Split::Base));
    for (int c = config.num_base; c < total; ++c)
        for (int i = 0; i < config.k_shot; ++i) ds.novel.push_back(make(c, Split::Novel));
    for (int c = 0; c < total; ++c)
        for (int i = 0; i < config.test_per_category; ++i) ds.test.push_back(make(c, Split::Test));
    return ds;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    const auto& c = ds.config;
    nlohmann::ordered_json j;
    j["image_size"] = c.image_size;
    j["num_base"] = c.num_base;
    j["num_novel"] = c.num_novel;
    j["k_shot"] = c.k_shot;
    j["base_per_category"] = c.base_per_category;
    j["test_per_category"] = c.test_per_category;
    j["seed"] = c.seed;
    j["part_dropout"] = c.part_dropout;
    j["jitter"] = c.jitter;
    j["noise"] = c.noise;
    j["categories"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ds.names.size(); ++i) {
        nlohmann::ordered_json bits = nlohmann::ordered_json::array();
        for (auto b : ds.attributes[i].bits) bits.push_back(static_cast<int>(b));
        j["categories"].push_back({{"name", ds.names[i]}, {"attributes", bits}});
    }
    j["samples"] = nlohmann::ordered_json::array();
    const int pixels = c.image_size * c.image_size * 3;
    const std::size_t count = ds.base.size() + ds.novel.size() + ds.test.size();
    Eigen::MatrixXd images(static_cast<Eigen::Index>(count), pixels);
    Eigen::Index row = 0;
    for (const auto* split : {&ds.base, &ds.novel, &ds.test}) {
        for (const auto& s : *split) {
            j["samples"].push_back({{"label", s.label}, {"split", to_string(s.split)}});
            for (int p = 0; p < pixels; ++p) images(row, p) = s.image.pixels[static_cast<std::size_t>(p)];
            ++row;
        }
    }
    write_matrix_binary(dir / "images.fmat", images);
    std::ofstream out(dir / "dataset.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "dataset.json").string());
    out << j.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "dataset.json");
    if (!in) throw IoError("cannot open " + (dir / "dataset.json").string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError((dir / "dataset.json").string() + ": " + e.what());
    }
    Dataset ds;
    auto& c = ds.config;
    c.image_size = j.at("image_size").get<int>();
    c.num_base = j.at("num_base").get<int>();
    c.num_novel = j.at("num_novel").get<int>();
    c.k_shot = j.at("k_shot").get<int>();
    c.base_per_category = j.at("base_per_category").get<int>();
    c.test_per_category = j.at("test_per_category").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.part_dropout = j.at("part_dropout").get<double>();
    c.jitter = j.at("jitter").get<int>();
    c.noise = j.at("noise").get<double>();
    for (const auto& cat : j.at("categories")) {
        AttributeLabelVector v;
        v.category_id = static_cast<int>(ds.names.size());
        for (const auto& b : cat.at("attributes")) v.bits.push_back(static_cast<std::uint8_t>(b.get<int>()));
        ds.names.push_back(cat.at("name").get<std::string>());
        ds.attributes.push_back(std::move(v));
    }
    c.attributes = {ds.names, ds.attributes};
    validate_attribute_table(c.attributes, ds.num_categories());

    const Eigen::MatrixXd images = read_matrix_binary(dir / "images.fmat");
    const int pixels = c.image_size * c.image_size * 3;
    const auto& samples = j.at("samples");
    if (images.rows() != static_cast<Eigen::Index>(samples.size()) || images.cols() != pixels)
        throw IoError((dir / "images.fmat").string() + ": shape does not match the manifest");
    Eigen::Index row = 0;
    for (const auto& s : samples) {
        ToyImage t;
        t.label = s.at("label").get<int>();
        if (t.label < 0 || t.label >= ds.num_categories()) throw IoError("dataset sample label out of range");
        t.split = parse_split(s.at("split").get<std::string>());
        t.attributes = ds.attributes[static_cast<std::size_t>(t.label)].bits;
        t.image = Image(c.image_size, c.image_size, 3);
        for (int p = 0; p < pixels; ++p) {
            const double v = images(row, p);
            if (!(v >= 0.0 && v <= 255.0)) throw IoError("dataset pixel out of range");
            t.image.pixels[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(v);
        }
        ++row;
        (t.split == Split::Base ? ds.base : t.split == Split::Novel ? ds.novel : ds.test).push_back(std::move(t));
    }
    return ds;
}

void export_dataset_images(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    for (const auto* split : {&ds.base, &ds.novel, &ds.test}) {
        for (std::size_t i = 0; i < split->size(); ++i) {
            const auto& s = (*split)[i];
            write_ppm(dir / (std::string(to_string(s.split)) + "_" + std::to_string(i) + "_" +
                             ds.names[static_cast<std::size_t>(s.label)] + ".ppm"),
                      s.image);
        }
    }
}

}  // namespace fsrl
