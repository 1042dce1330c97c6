#include "fsrl/matrix_io.hpp"

#include "fsrl/errors.hpp"

#include <array>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace fsrl {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> bytes{};
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) throw IoError("empty numeric field");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) throw IoError("malformed number '" + t + "'");
    return v;
}

void write_matrix_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMatrixMagic, sizeof kMatrixMagic);
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(m(r, c)));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Eigen::MatrixXd read_matrix_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 24 || std::memcmp(data.data(), kMatrixMagic, 8) != 0)
        throw IoError(path.string() + ": not a binary matrix file");
    const std::uint64_t rows = get_u64(data.data() + 8);
    const std::uint64_t cols = get_u64(data.data() + 16);
    if (cols != 0 && rows > (data.size() - 24) / 8 / cols)
        throw IoError(path.string() + ": truncated payload");
    if (data.size() != 24 + rows * cols * 8) throw IoError(path.string() + ": payload size mismatch");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const unsigned char* p = data.data() + 24;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c, p += 8) m(r, c) = std::bit_cast<double>(get_u64(p));
    }
    return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (rows.empty() && !header_seen) {
            // A leading row of names (as written for knowledge matrices) is skipped.
            header_seen = true;
            const auto cells = split_csv_line(line);
            double ignored = 0.0;
            const auto first = trim(cells.front());
            if (std::from_chars(first.data(), first.data() + first.size(), ignored).ec != std::errc{}) continue;
        }
        std::vector<double> row;
        for (const auto& cell : split_csv_line(line)) row.push_back(parse_double(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError(path.string() + ": ragged CSV row " + std::to_string(rows.size() + 1));
        rows.push_back(std::move(row));
    }
    const auto cols = rows.empty() ? 0 : rows.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    if (path.extension() == ".csv")
        write_matrix_csv(path, m);
    else
        write_matrix_binary(path, m);
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? read_matrix_csv(path) : read_matrix_binary(path);
}

}  // namespace fsrl
