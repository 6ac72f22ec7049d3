#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tessdiff/errors.hpp"

namespace tessdiff::io {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string cell(double v) { return format_double(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(long v) { return std::to_string(v); }
inline std::string cell(unsigned long v) { return std::to_string(v); }
inline std::string cell(long long v) { return std::to_string(v); }
inline std::string cell(unsigned long long v) { return std::to_string(v); }
inline std::string cell(std::string_view v) { return std::string(v); }
inline std::string cell(const std::string& v) { return v; }
inline std::string cell(const char* v) { return v; }

/// Row-oriented CSV builder with a fixed header; fields are written without quoting.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  template <class... T>
  void row(const T&... v) {
    if (sizeof...(T) != header_.size())
      throw Error("CSV row has " + std::to_string(sizeof...(T)) + " fields, header has " +
                  std::to_string(header_.size()));
    rows_.push_back({cell(v)...});
  }

  void add(std::vector<std::string> cells) {
    if (cells.size() != header_.size())
      throw Error("CSV row has " + std::to_string(cells.size()) + " fields, header has " +
                  std::to_string(header_.size()));
    rows_.push_back(std::move(cells));
  }

  /// Appends the rows of a table with the same header.
  void append(const CsvTable& other) {
    if (other.header_ != header_) throw Error("CSV tables have different headers");
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
  }

  std::size_t size() const noexcept { return rows_.size(); }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    const auto s = str();
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!f) throw Error("write failed for " + path.string());
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parsed CSV file with a header row.
struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataFormatError("CSV has no column '" + std::string(name) + "'");
  }

  std::vector<double> numbers(std::string_view name) const {
    const auto c = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      double v = 0.0;
      const auto& s = r.at(c);
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataFormatError("CSV column '" + std::string(name) + "' holds non-numeric '" + s + "'");
      out.push_back(v);
    }
    return out;
  }

  std::vector<std::string> strings(std::string_view name) const {
    const auto c = column_index(name);
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(r.at(c));
    return out;
  }
};

inline CsvData read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataFormatError("cannot open " + path.string());
  CsvData d;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(f, line)) throw DataFormatError("empty CSV " + path.string());
  d.header = split(line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != d.header.size())
      throw DataFormatError("CSV row " + std::to_string(d.rows.size() + 1) + " of " + path.string() + " has " +
                            std::to_string(cells.size()) + " fields, expected " + std::to_string(d.header.size()));
    d.rows.push_back(std::move(cells));
  }
  return d;
}

}  // namespace tessdiff::io
