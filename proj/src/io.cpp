#include "jmd/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

namespace jmd::io {
namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  // A trailing blank line is not data.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::string where(const fs::path& path, size_t line) { return path.string() + ":" + std::to_string(line + 1); }

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_index(std::string_view s, Index& out) {
  s = trim(s);
  if (s.empty() || s.front() == '-' || s.front() == '+') return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t pos = 0;
  while (true) {
    const size_t comma = line.find(',', pos);
    fields.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return fields;
}

}  // namespace

Matrix read_features(const fs::path& path) {
  const std::string text = slurp(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw FormatError(path.string() + ": empty feature file");
  std::vector<std::vector<double>> rows;
  for (size_t l = 0; l < lines.size(); ++l) {
    const auto fields = split_commas(lines[l]);
    std::vector<double> row(fields.size());
    for (size_t c = 0; c < fields.size(); ++c)
      if (!parse_double(fields[c], row[c])) throw FormatError(where(path, l) + ": malformed number in column " + std::to_string(c + 1));
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(where(path, l) + ": expected " + std::to_string(rows.front().size()) + " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return m;
}

Vector read_predictions(const fs::path& path) {
  const std::string text = slurp(path);
  const auto lines = lines_of(text);
  Vector v(static_cast<Index>(lines.size()));
  for (size_t l = 0; l < lines.size(); ++l)
    if (!parse_double(lines[l], v[static_cast<Index>(l)])) throw FormatError(where(path, l) + ": malformed number");
  return v;
}

std::vector<std::pair<Index, Index>> read_index_pairs(const fs::path& path) {
  const std::string text = slurp(path);
  const auto lines = lines_of(text);
  std::vector<std::pair<Index, Index>> pairs;
  for (size_t l = 0; l < lines.size(); ++l) {
    const auto fields = split_commas(lines[l]);
    Index a = 0, b = 0;
    if (fields.size() != 2 || !parse_index(fields[0], a) || !parse_index(fields[1], b))
      throw FormatError(where(path, l) + ": expected \"i,j\" with unsigned integers");
    pairs.emplace_back(a, b);
  }
  return pairs;
}

DiffusionConfig parse_config(const std::string& text, const std::string& source) {
  DiffusionConfig cfg;
  const auto lines = lines_of(text);
  for (size_t l = 0; l < lines.size(); ++l) {
    const std::string_view line = trim(lines[l]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const std::string at = source + ":" + std::to_string(l + 1);
    if (eq == std::string_view::npos) throw ConfigError(at + ": expected \"key = value\"");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));

    auto real = [&](double& field) {
      if (!parse_double(value, field)) throw ConfigError(at + ": malformed real for " + key);
    };
    auto integer = [&](int& field) {
      Index v = 0;
      if (!parse_index(value, v) || v > 1'000'000) throw ConfigError(at + ": malformed integer for " + key);
      field = static_cast<int>(v);
    };

    if (key == "sigma2") real(cfg.sigma2);
    else if (key == "delta") real(cfg.delta);
    else if (key == "delta_b") real(cfg.delta_b);
    else if (key == "sigma_f2") real(cfg.sigma_f2);
    else if (key == "sigma_k2") real(cfg.sigma_k2);
    else if (key == "N") integer(cfg.neighbors);
    else if (key == "K") integer(cfg.sparsity);
    else if (key == "T1") integer(cfg.max_outer);
    else if (key == "T2") integer(cfg.max_inner);
    else if (key == "improvement_eps") real(cfg.improvement_eps);
    else if (key == "bridge_solver") {
      if (value == "auto") cfg.bridge_solver = BridgeSolver::Auto;
      else if (value == "implicit") cfg.bridge_solver = BridgeSolver::Implicit;
      else if (value == "explicit") cfg.bridge_solver = BridgeSolver::Explicit;
      else throw ConfigError(at + ": bridge_solver must be auto, implicit or explicit");
    } else if (key == "auto_terminate") {
      if (value == "true" || value == "1") cfg.auto_terminate = true;
      else if (value == "false" || value == "0") cfg.auto_terminate = false;
      else throw ConfigError(at + ": auto_terminate must be true or false");
    } else {
      throw ConfigError(at + ": unknown key \"" + key + "\"");
    }
  }
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

DiffusionConfig read_config(const fs::path& path) { return parse_config(slurp(path), path.string()); }

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string features_text(const Matrix& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_number(m(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string predictions_text(const Vector& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) out += format_number(v[i]) + '\n';
  return out;
}

std::string pairs_text(const std::vector<std::pair<Index, Index>>& pairs) {
  std::string out;
  for (const auto& [a, b] : pairs) out += std::to_string(a) + ',' + std::to_string(b) + '\n';
  return out;
}

std::string config_text(const DiffusionConfig& cfg) {
  std::string out;
  out += "sigma2 = " + format_number(cfg.sigma2) + '\n';
  out += "delta = " + format_number(cfg.delta) + '\n';
  out += "delta_b = " + format_number(cfg.delta_b) + '\n';
  out += "sigma_f2 = " + format_number(cfg.sigma_f2) + '\n';
  out += "sigma_k2 = " + format_number(cfg.sigma_k2) + '\n';
  out += "N = " + std::to_string(cfg.neighbors) + '\n';
  out += "K = " + std::to_string(cfg.sparsity) + '\n';
  out += "T1 = " + std::to_string(cfg.max_outer) + '\n';
  out += "T2 = " + std::to_string(cfg.max_inner) + '\n';
  out += "improvement_eps = " + format_number(cfg.improvement_eps) + '\n';
  out += std::string("bridge_solver = ") + to_string(cfg.bridge_solver) + '\n';
  out += std::string("auto_terminate = ") + (cfg.auto_terminate ? "true" : "false") + '\n';
  return out;
}

std::uint8_t heatmap_pixel(double rho) {
  const double scaled = std::round((std::clamp(rho, -1.0, 1.0) + 1.0) / 2.0 * 255.0);  // halves round away from zero
  return static_cast<std::uint8_t>(scaled);
}

std::string pgm_bytes(const Matrix& rho) {
  std::string out = "P5\n" + std::to_string(rho.cols()) + " " + std::to_string(rho.rows()) + "\n255\n";
  for (Index r = 0; r < rho.rows(); ++r)
    for (Index c = 0; c < rho.cols(); ++c) out += static_cast<char>(heatmap_pixel(rho(r, c)));
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

}  // namespace jmd::io
