#pragma once

#include <string>
#include <vector>

#include "hubopt/model.hpp"

// Delimiter-separated series ingestion: a header row of column names, then
// one row per period (a leading timestamp column is fine; only requested
// columns are parsed as numbers).

namespace hubopt {

struct SeriesFile {
  std::string path;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows; // row-major raw cells
};

SeriesFile read_delimited(const std::string& path);

// Parses one named column to numbers. take = 0 keeps every row; otherwise
// the first `take` rows after `skip` are used and a shortfall is an error.
std::vector<double> extract_column(const SeriesFile& file,
                                   const std::string& column, size_t take = 0,
                                   size_t skip = 0);

struct AvailabilitySeries {
  std::string name;
  std::vector<double> values; // in [0, 1]
  std::string source;
  std::string span; // free-form note, e.g. covered years
};

// Loads the first T values of a capacity-factor column and enforces the
// [0, 1] range.
AvailabilitySeries load_series(const std::string& path,
                               const std::string& column, size_t T,
                               size_t skip = 0);

} // namespace hubopt
