#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "episcan/error.hpp"
#include "episcan/time_series.hpp"

namespace episcan {

struct CsvOptions {
  // 1-based value column; when unset it is column 2 with timestamps, else 1.
  std::optional<std::size_t> column;
  // Header name of the value column; requires skip_header.
  std::string column_name;
  bool skip_header = false;
  bool timestamps = false;  // first column holds observation labels
  char delimiter = ',';
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\"");
  return s.substr(b, e - b + 1);
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace detail

// Reads one real-valued column; blank lines are skipped, and any other line
// whose value does not parse as a finite real is an error naming its 1-based
// line number.
inline TimeSeries read_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::string line;
  std::size_t row = 0;
  std::size_t col = opt.column.value_or(opt.timestamps ? 2 : 1);
  if (col == 0) throw std::invalid_argument("column index is 1-based");
  if (!opt.column_name.empty() && !opt.skip_header) {
    throw std::invalid_argument("selecting a column by name requires a header row");
  }
  TimeSeries s;
  bool header_pending = opt.skip_header;
  while (std::getline(in, line)) {
    ++row;
    if (detail::blank(line)) continue;
    const auto fields = detail::split_fields(line, opt.delimiter);
    if (header_pending) {
      header_pending = false;
      if (!opt.column_name.empty()) {
        bool found = false;
        for (std::size_t i = 0; i < fields.size(); ++i) {
          if (detail::trim(fields[i]) == opt.column_name) {
            col = i + 1;
            found = true;
          }
        }
        if (!found) throw parse_error("no column named '" + opt.column_name + "'", row);
      }
      continue;
    }
    if (fields.size() < col) {
      throw parse_error("row " + std::to_string(row) + ": missing column " + std::to_string(col),
                        row);
    }
    const std::string cell = detail::trim(fields[col - 1]);
    double v = 0.0;
    const char* end = cell.data() + cell.size();
    const auto res = std::from_chars(cell.data(), end, v);
    if (cell.empty() || res.ec != std::errc{} || res.ptr != end || !std::isfinite(v)) {
      throw parse_error("row " + std::to_string(row) + ": cannot parse '" + cell + "' as a number",
                        row);
    }
    s.values.push_back(v);
    if (opt.timestamps) s.labels.push_back(detail::trim(fields[0]));
  }
  if (s.empty()) throw data_error("input contains no observations");
  return s;
}

inline TimeSeries ingest_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  return read_csv(in, opt);
}

}  // namespace episcan
