#pragma once

// Plain-text file formats used by the command-line tool:
//   features     headerless CSV, one instance per row
//   predictions  one decimal per line
//   pairs        "i,j" per line (rank(i) > rank(j), or main i <-> reference j)
//   config       "key = value" per line, keys named after DiffusionConfig fields
//   report       square CSV matrix
//   heatmap      binary PGM (P5), pixel = round((rho + 1) / 2 * 255)
// Numbers are written with 17 significant digits so doubles round-trip.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jmd/joint.hpp"

namespace jmd::io {

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Malformed content or inconsistent shapes; messages carry file and line.
class FormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

Matrix read_features(const fs::path& path);
Vector read_predictions(const fs::path& path);
std::vector<std::pair<Index, Index>> read_index_pairs(const fs::path& path);
DiffusionConfig read_config(const fs::path& path);
DiffusionConfig parse_config(const std::string& text, const std::string& source = "<config>");

std::string format_number(double v);    // %.17g
std::string format_shortest(double v);  // shortest round-trip decimal

std::string features_text(const Matrix& m);
std::string predictions_text(const Vector& v);
std::string pairs_text(const std::vector<std::pair<Index, Index>>& pairs);
std::string config_text(const DiffusionConfig& cfg);

std::uint8_t heatmap_pixel(double rho);
std::string pgm_bytes(const Matrix& rho);

/// Writes via a sibling temp file and rename.
void write_file_atomic(const fs::path& path, const std::string& contents);

}  // namespace jmd::io
