#include "fsrl/errors.hpp"
#include "fsrl/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace fsrl {

void write_ppm(const std::filesystem::path& path, const Image& image) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    if (image.channels == 3) {
        out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
        out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    } else if (image.channels == 1) {
        out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
        out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    } else {
        throw ValidationError("PPM output supports 1 or 3 channels");
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_pgm(const std::filesystem::path& path, const AttributionMap& map) {
    Image gray(static_cast<int>(map.rows()), static_cast<int>(map.cols()), 1);
    const double peak = map.size() ? map.maxCoeff() : 0.0;
    for (int y = 0; y < gray.height; ++y) {
        for (int x = 0; x < gray.width; ++x) {
            const double v = peak > 0.0 ? std::clamp(map(y, x) / peak, 0.0, 1.0) : 0.0;
            gray.at(y, x, 0) = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    }
    write_ppm(path, gray);
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    in.get();
    if ((magic != "P6" && magic != "P5") || w <= 0 || h <= 0 || maxval != 255)
        throw IoError(path.string() + ": unsupported anymap header");
    Image img(h, w, magic == "P6" ? 3 : 1);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!in) throw IoError(path.string() + ": truncated pixel data");
    return img;
}

}  // namespace fsrl
