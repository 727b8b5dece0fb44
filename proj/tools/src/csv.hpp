#pragma once

#include <string>
#include <vector>

#include "ssir/linalg.hpp"

namespace tools {

// Headered numeric CSV, the only input format the tool reads.
struct CsvTable {
  std::vector<std::string> columns;
  ssir::Matrix values;  // one row per record, one column per header field
};

// Throws ssir::InvalidArgument on anything malformed: missing header,
// ragged rows, non-numeric cells, empty files.
CsvTable read_csv(const std::string& path);

// Shortest decimal representation that round-trips; "NA" for NaN.
std::string format_double(double v);

// "2,5,8" -> {2, 5, 8}; throws ssir::InvalidArgument on junk.
std::vector<int> parse_int_list(const std::string& text);

}  // namespace tools
