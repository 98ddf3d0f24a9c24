#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypoctrl/core.hpp"
#include "hypoctrl/grid.hpp"

namespace hypoctrl::io {

using json = nlohmann::json;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {
inline void dump(const json& j, std::string& out, int indent) {
  const std::string pad(2 * (indent + 1), ' '), close(2 * indent, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      // nlohmann::json objects are std::map backed, so iteration is key-sorted
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        dump(it.value(), out, indent + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump(j[i], out, indent + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump(j[i], out, indent + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}
}  // namespace detail

// Sorted keys, floats at 17 significant digits, 2-space indent.
inline std::string to_text(const json& j) {
  std::string out;
  detail::dump(j, out, 0);
  out += "\n";
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io_failure, "cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error(ErrorKind::io_failure, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io_failure, "cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, to_text(j)); }

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::string text;
  for (std::size_t i = 0; i < header.size(); ++i) text += (i ? "," : "") + header[i];
  text += "\n";
  for (const auto& row : rows) {
    require(row.size() == header.size(), "CSV row width differs from the header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::string cell = format_double(row[i]);
      if (cell.front() == '"') cell = cell.substr(1, cell.size() - 2);
      text += (i ? "," : "") + cell;
    }
    text += "\n";
  }
  write_text(path, text);
}

inline json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

// Little-endian float64 (re, im) pairs, row-major.
namespace detail {
inline void write_pairs(const std::filesystem::path& path, const std::vector<cplx>& values) {
  static_assert(std::endian::native == std::endian::little, "binary export assumes a little-endian host");
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io_failure, "cannot open " + path.string() + " for writing");
  for (const cplx& v : values) {
    const double pair[2] = {v.real(), v.imag()};
    os.write(reinterpret_cast<const char*>(pair), sizeof pair);
  }
  if (!os) throw Error(ErrorKind::io_failure, "write failed for " + path.string());
}

inline std::vector<cplx> read_pairs(const std::filesystem::path& path, std::size_t count) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io_failure, "cannot read " + path.string());
  std::vector<cplx> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    double pair[2];
    is.read(reinterpret_cast<char*>(pair), sizeof pair);
    if (!is) throw Error(ErrorKind::io_failure, "truncated binary file " + path.string());
    out[i] = cplx(pair[0], pair[1]);
  }
  return out;
}
}  // namespace detail

// base.bin + base.json sidecar
inline void write_matrix(const std::filesystem::path& base, const CMat& m) {
  std::vector<cplx> values;
  values.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
  detail::write_pairs(base.string() + ".bin", values);
  write_json(base.string() + ".json",
             json{{"rows", m.rows()}, {"cols", m.cols()}, {"layout", "row-major"}, {"dtype", "complex128-le"}});
}

inline CMat read_matrix(const std::filesystem::path& base) {
  const json side = json::parse(read_text(base.string() + ".json"));
  const Eigen::Index rows = side.at("rows"), cols = side.at("cols");
  const std::vector<cplx> values = detail::read_pairs(base.string() + ".bin", rows * cols);
  CMat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = values[i * cols + j];
  return m;
}

inline void write_grid(const std::filesystem::path& base, const grid::GridFunction& f) {
  detail::write_pairs(base.string() + ".bin", f.values());
  json axes = json::array(), shape = json::array();
  for (const grid::Axis& a : f.axes()) {
    axes.push_back(json{{"points", a.points}, {"spacing", a.spacing}, {"center", a.center}});
    shape.push_back(a.points);
  }
  write_json(base.string() + ".json", json{{"axes", axes}, {"shape", shape}, {"dtype", "complex128-le"}});
}

inline grid::GridFunction read_grid(const std::filesystem::path& base) {
  const json side = json::parse(read_text(base.string() + ".json"));
  std::vector<grid::Axis> axes;
  for (const json& a : side.at("axes"))
    axes.emplace_back(a.at("points").get<int>(), a.at("spacing").get<double>(), a.at("center").get<double>());
  grid::GridFunction f(axes);
  f.values() = detail::read_pairs(base.string() + ".bin", f.size());
  return f;
}

}  // namespace hypoctrl::io
