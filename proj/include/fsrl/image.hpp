#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fsrl {

// 8-bit image, interleaved channels (row, column, channel).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int h, int w, int c = 3) : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h * w * c), 0) {}

    std::uint8_t& at(int y, int x, int c) { return pixels[static_cast<std::size_t>((y * width + x) * channels + c)]; }
    std::uint8_t at(int y, int x, int c) const { return pixels[static_cast<std::size_t>((y * width + x) * channels + c)]; }

    bool operator==(const Image&) const = default;
};

// Real-valued feature grid, stored channel-major (channel, row, column).
struct FeatureMap {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(int h, int w, int c) : height(h), width(w), channels(c), values(static_cast<std::size_t>(h * w * c), 0.0) {}

    double& at(int c, int y, int x) { return values[static_cast<std::size_t>((c * height + y) * width + x)]; }
    double at(int c, int y, int x) const { return values[static_cast<std::size_t>((c * height + y) * width + x)]; }
    double* ptr(int c, int y, int x) { return &at(c, y, x); }
    const double* ptr(int c, int y, int x) const { return values.data() + (c * height + y) * width + x; }

    bool operator==(const FeatureMap&) const = default;
};

// Spatial saliency grid, rows x cols = height x width.
using AttributionMap = Eigen::MatrixXd;

// Portable anymap output. Grayscale maps are scaled from [0, max] to [0, 255].
void write_ppm(const std::filesystem::path& path, const Image& image);
void write_pgm(const std::filesystem::path& path, const AttributionMap& map);
Image read_ppm(const std::filesystem::path& path);

}  // namespace fsrl
