#pragma once

#include "fsrl/image.hpp"
#include "fsrl/knowledge.hpp"
#include "fsrl/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fsrl {

// Number of distinct shape parts the renderer can draw; attribute i renders part i.
inline constexpr int kShapePartCount = 12;

enum class Split { Base, Novel, Test };
const char* to_string(Split split);

struct ToyImage {
    Image image;
    int label = 0;
    Split split = Split::Base;
    std::vector<std::uint8_t> attributes;
};

struct DatasetConfig {
    int num_base = 8;
    int num_novel = 4;
    int k_shot = 5;
    int base_per_category = 40;
    int test_per_category = 30;
    int image_size = 16;
    std::uint64_t seed = 0;
    double part_dropout = 0.15;  // chance that a part of a sample is not drawn
    int jitter = 1;              // max object shift in pixels
    double noise = 12.0;         // per-pixel Gaussian noise sigma
    AttributeLabelFile attributes;  // empty: shipped table (8+4) or a generated one
};

// Categories 0..num_base-1 are base, the rest novel.
struct Dataset {
    DatasetConfig config;
    std::vector<std::string> names;
    std::vector<AttributeLabelVector> attributes;
    std::vector<ToyImage> base;   // abundant base-category samples
    std::vector<ToyImage> novel;  // exactly k_shot per novel category
    std::vector<ToyImage> test;   // held out, every category

    int num_categories() const { return config.num_base + config.num_novel; }
    bool is_novel(int category) const { return category >= config.num_base; }
    AttributeLabelFile attribute_file() const { return {names, attributes}; }
};

// The shipped 8 base / 4 novel table: each novel category shares two of its three parts
// with one base category.
AttributeLabelFile shipped_attribute_table();

// Deterministic table of distinct three-part categories for other sizes.
AttributeLabelFile generated_attribute_table(int num_base, int num_novel);

// Throws ValidationError for wrong counts, ragged or empty rows, duplicate rows,
// or more attributes than renderable parts.
void validate_attribute_table(const AttributeLabelFile& table, int num_categories);

Dataset generate_dataset(const DatasetConfig& config);

// Renders one sample of `category`; exposed for tests and previews.
Image render_category(const std::vector<std::uint8_t>& attributes, const DatasetConfig& config, Rng& rng);

// <dir>/dataset.json (config, names, attributes, per-sample label and split) and
// <dir>/images.fmat (one flattened H*W*3 image per row, base then novel then test).
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

// Writes every sample as <dir>/<split>_<index>_<category>.ppm.
void export_dataset_images(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace fsrl
