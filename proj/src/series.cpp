#include <algorithm>
#include <charconv>
#include <fstream>

#include "hubopt/series.hpp"

namespace hubopt {

namespace {

std::string trim(std::string s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

} // namespace

SeriesFile read_delimited(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open series file");
  SeriesFile file;
  file.path = path;
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty series file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    line.erase(0, 3);
  file.columns = split_row(line);
  if (file.columns.empty() ||
      std::all_of(file.columns.begin(), file.columns.end(),
                  [](const std::string& c) { return c.empty(); }))
    throw Error(path + ": missing header row");
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (cells.size() != file.columns.size())
      throw Error(path + ": row " + std::to_string(file.rows.size() + 2) +
                  " has " + std::to_string(cells.size()) + " cells, header has " +
                  std::to_string(file.columns.size()));
    file.rows.push_back(std::move(cells));
  }
  return file;
}

std::vector<double> extract_column(const SeriesFile& file,
                                   const std::string& column, size_t take,
                                   size_t skip) {
  auto it = std::find(file.columns.begin(), file.columns.end(), column);
  if (it == file.columns.end())
    throw Error(file.path + ": no column named \"" + column + "\"");
  size_t ci = static_cast<size_t>(it - file.columns.begin());

  size_t avail = file.rows.size() > skip ? file.rows.size() - skip : 0;
  size_t want = take == 0 ? avail : take;
  if (avail < want)
    throw Error(file.path + ": column \"" + column + "\" has " +
                std::to_string(avail) + " rows after offset " +
                std::to_string(skip) + ", need " + std::to_string(want));

  std::vector<double> out(want);
  for (size_t i = 0; i < want; ++i) {
    const std::string& cell = file.rows[skip + i][ci];
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
        cell.empty())
      throw Error(file.path + ": row " + std::to_string(skip + i + 2) +
                  ": non-numeric cell \"" + cell + "\" in column \"" + column +
                  "\"");
    out[i] = v;
  }
  return out;
}

AvailabilitySeries load_series(const std::string& path,
                               const std::string& column, size_t T,
                               size_t skip) {
  SeriesFile file = read_delimited(path);
  AvailabilitySeries series;
  series.name = column;
  series.source = path;
  series.values = extract_column(file, column, T, skip);
  for (size_t i = 0; i < series.values.size(); ++i) {
    double v = series.values[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(path + ": row " + std::to_string(skip + i + 2) +
                  ": capacity factor " + std::to_string(v) +
                  " outside [0, 1] in column \"" + column + "\"");
  }
  return series;
}

} // namespace hubopt
