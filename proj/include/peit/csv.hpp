#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "peit/errors.hpp"

// Deterministic CSV output and a small reader for oscillation traces.
// Doubles are printed with the shortest representation that round-trips,
// so re-running identical inputs yields byte-identical files.

namespace peit {

inline std::string csv_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class CsvBuilder {
public:
  explicit CsvBuilder(std::vector<std::string> header)
      : columns_(header.size()) {
    append_row(header);
  }

  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
      throw DomainError("CSV row width does not match header");
    append_row(cells);
  }

  const std::string& text() const { return text_; }
  size_t columns() const { return columns_; }

private:
  void append_row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  size_t columns_;
  std::string text_;
};

struct TraceData {
  std::vector<double> times;
  std::vector<double> values;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

inline double parse_double_cell(const std::string& cell, int line_no) {
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw ConfigError("trace line " + std::to_string(line_no) +
                      ": cannot parse number '" + cell + "'");
  return v;
}

} // namespace detail

// reads a two-column trace (header: time_us,excitation)
inline TraceData parse_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("trace file is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() != 2 || header[0] != "time_us" ||
      header[1] != "excitation")
    throw ConfigError("trace header must be: time_us,excitation");

  TraceData trace;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != 2)
      throw ConfigError("trace line " + std::to_string(line_no) +
                        ": expected 2 columns");
    trace.times.push_back(detail::parse_double_cell(cells[0], line_no));
    trace.values.push_back(detail::parse_double_cell(cells[1], line_no));
  }
  if (trace.times.size() < 8)
    throw ConfigError("trace needs at least 8 samples");
  return trace;
}

inline TraceData parse_trace_csv_string(const std::string& text) {
  std::istringstream in(text);
  return parse_trace_csv(in);
}

} // namespace peit
