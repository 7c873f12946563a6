#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace donorsim {

// %.17g round-trips every double; non-finite values are spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvTable {
 public:
  struct Cell {
    std::string text;
    Cell(std::string s) : text(std::move(s)) {}
    Cell(const char* s) : text(s) {}
    Cell(double v) : text(format_double(v)) {}
    template <typename I, typename = std::enable_if_t<std::is_integral_v<I>>>
    Cell(I v) : text(std::to_string(v)) {}
  };

  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row(const std::vector<Cell>& cells) {
    if (cells.size() != header_.size()) throw std::invalid_argument("csv row width does not match header");
    std::vector<std::string> out;
    for (const auto& c : cells) out.push_back(c.text);
    rows_.push_back(std::move(out));
    return *this;
  }

  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

  std::string str() const {
    std::string s;
    auto line = [&](const std::vector<std::string>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += v[i];
      }
      s += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return s;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace donorsim
