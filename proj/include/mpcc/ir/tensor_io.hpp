#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpcc/core/error.hpp"
#include "mpcc/core/tensor.hpp"

namespace mpcc {

namespace fs = std::filesystem;

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

inline nlohmann::json read_json(const fs::path& p) {
  const std::string text = read_text(p);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

// Tensors on disk: `name.bin` holds little-endian f64 values with a
// `name.bin.json` sidecar {"shape": [...], "dtype": "f64"}; `name.csv` holds
// one row per line (shape [rows, cols], or [n] for a single column).

inline DTensor read_bin(const fs::path& p) {
  const auto meta = read_json(p.string() + ".json");
  if (meta.value("dtype", std::string("f64")) != "f64") throw ConfigError(p.string() + ": only f64 tensors are supported");
  Shape shape = meta.at("shape").get<Shape>();
  const std::string raw = read_text(p);
  if (raw.size() != numel(shape) * 8) {
    throw ConfigError(p.string() + ": " + std::to_string(raw.size()) + " bytes for shape " + shape_str(shape));
  }
  std::vector<double> data(numel(shape));
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(raw[i * 8 + b]);
    std::memcpy(&data[i], &bits, 8);
  }
  return DTensor(std::move(shape), std::move(data));
}

inline void write_bin(const fs::path& p, const DTensor& t) {
  std::string raw(t.size() * 8, '\0');
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &t.data[i], 8);
    for (int b = 0; b < 8; ++b) raw[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  write_text(p, raw);
  write_text(p.string() + ".json", nlohmann::json{{"shape", t.shape}, {"dtype", "f64"}}.dump() + "\n");
}

inline DTensor read_csv(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::string line;
  std::vector<double> data;
  std::int64_t rows = 0, cols = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::int64_t c = 0;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        data.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(p.string() + ": bad number '" + cell + "' on row " + std::to_string(rows + 1));
      }
      ++c;
    }
    if (cols >= 0 && c != cols) throw ConfigError(p.string() + ": ragged row " + std::to_string(rows + 1));
    cols = c;
    ++rows;
  }
  if (rows == 0) throw ConfigError(p.string() + ": empty CSV");
  Shape shape = cols == 1 ? Shape{rows} : Shape{rows, cols};
  return DTensor(std::move(shape), std::move(data));
}

inline void write_csv(const fs::path& p, const DTensor& t) {
  const std::size_t cols = t.shape.size() >= 2 ? numel(Shape(t.shape.begin() + 1, t.shape.end())) : 1;
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < t.size(); ++i) os << t.data[i] << ((i + 1) % cols == 0 ? "\n" : ",");
  write_text(p, os.str());
}

inline DTensor read_tensor(const fs::path& p) {
  if (p.extension() == ".csv") return read_csv(p);
  if (p.extension() == ".bin") return read_bin(p);
  throw ConfigError(p.string() + ": tensor files must end in .bin or .csv");
}

inline void write_tensor(const fs::path& p, const DTensor& t) {
  if (p.extension() == ".csv") return write_csv(p, t);
  if (p.extension() == ".bin") return write_bin(p, t);
  throw ConfigError(p.string() + ": tensor files must end in .bin or .csv");
}

// Row `i` of a tensor with a leading batch dimension.
inline DTensor batch_row(const DTensor& t, std::size_t i) {
  if (t.shape.empty()) throw ShapeError("batched tensor has no leading dimension");
  Shape rest(t.shape.begin() + 1, t.shape.end());
  if (rest.empty()) rest = {1};
  const std::size_t n = numel(rest);
  std::vector<double> data(t.data.begin() + static_cast<std::ptrdiff_t>(i * n),
                           t.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  return DTensor(std::move(rest), std::move(data));
}

inline DTensor stack_rows(const std::vector<DTensor>& rows) {
  if (rows.empty()) return {};
  Shape shape{static_cast<std::int64_t>(rows.size())};
  shape.insert(shape.end(), rows.front().shape.begin(), rows.front().shape.end());
  std::vector<double> data;
  for (const auto& r : rows) data.insert(data.end(), r.data.begin(), r.data.end());
  return DTensor(std::move(shape), std::move(data));
}

}  // namespace mpcc
