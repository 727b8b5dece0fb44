#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ssir/errors.hpp"

namespace tools {

namespace {

// Split one CSV line on commas. No quoting support: the tool only deals in
// numeric tables with plain identifiers, and silently "supporting" half of
// RFC 4180 would hide more errors than it forgives.
std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    // Trim spaces and a trailing CR from Windows line endings.
    std::size_t begin = field.find_first_not_of(" \t\r");
    std::size_t end = field.find_last_not_of(" \t\r");
    if (begin == std::string::npos) {
      out.emplace_back();
    } else {
      out.push_back(field.substr(begin, end - begin + 1));
    }
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ssir::InvalidArgument("csv: cannot parse '" + cell + "' at row " +
                                std::to_string(row + 1) + ", column " +
                                std::to_string(col + 1));
  }
  return value;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ssir::InvalidArgument("csv: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ssir::InvalidArgument("csv: '" + path + "' is empty");
  }
  CsvTable table;
  table.columns = split_line(line);
  if (table.columns.empty()) {
    throw ssir::InvalidArgument("csv: '" + path + "' has an empty header");
  }
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (table.columns[j].empty()) {
      throw ssir::InvalidArgument("csv: header field " + std::to_string(j + 1) +
                                  " of '" + path + "' is empty");
    }
  }

  const std::size_t width = table.columns.size();
  std::vector<double> cells;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      continue;  // ignore blank trailing lines
    }
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != width) {
      throw ssir::InvalidArgument(
          "csv: row " + std::to_string(rows + 1) + " of '" + path + "' has " +
          std::to_string(fields.size()) + " fields, expected " +
          std::to_string(width));
    }
    for (std::size_t j = 0; j < width; ++j) {
      cells.push_back(parse_cell(fields[j], rows, j));
    }
    ++rows;
  }
  if (rows == 0) {
    throw ssir::InvalidArgument("csv: '" + path + "' has no data rows");
  }
  table.values.resize(static_cast<Eigen::Index>(rows),
                      static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cells[i * width + j];
    }
  }
  return table;
}

std::string format_double(double v) {
  if (std::isnan(v)) {
    return "NA";
  }
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    int value = 0;
    const char* first = item.data();
    const char* last = item.data() + item.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || item.empty()) {
      throw ssir::InvalidArgument("cannot parse integer list entry '" + item +
                                  "'");
    }
    out.push_back(value);
  }
  if (out.empty()) {
    throw ssir::InvalidArgument("integer list is empty");
  }
  return out;
}

}  // namespace tools
