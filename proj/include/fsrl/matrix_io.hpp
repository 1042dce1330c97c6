#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>

namespace fsrl {

// Binary matrix layout, all little-endian:
//   bytes 0..7    magic "FSRLMAT1"
//   bytes 8..15   uint64 rows
//   bytes 16..23  uint64 cols
//   then rows*cols IEEE-754 float64 values, row-major.
inline constexpr char kMatrixMagic[8] = {'F', 'S', 'R', 'L', 'M', 'A', 'T', '1'};

void write_matrix_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_binary(const std::filesystem::path& path);

// Plain numeric CSV, one matrix row per line, no header; a leading row of names is skipped on
// read. Values are written with 17 significant digits so a round trip is lossless.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// Dispatch on extension: ".csv" is CSV, anything else is the binary format.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace fsrl
