#pragma once

// Dataset CSV: a header row of column names, then one observation per row.
// Rows with an empty or NA cell are dropped; any other non-numeric cell is an error.

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "tcclime/matrix.hpp"
#include "tcclime/rank_corr.hpp"

namespace tcclime {

inline bool is_missing_cell(std::string cell) {
  cell.erase(0, cell.find_first_not_of(" \t\r"));
  cell.erase(cell.find_last_not_of(" \t\r") + 1);
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan";
}

struct DatasetReadReport {
  std::size_t dropped_rows = 0;
};

inline StudyDataset read_dataset_csv(std::istream& is, const std::string& label = "dataset",
                                     DatasetReadReport* report = nullptr) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), Errc::parse_error, label + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  StudyDataset d;
  d.label = label;
  for (auto& name : split_csv_line(line)) {
    name.erase(0, name.find_first_not_of(" \t\""));
    name.erase(name.find_last_not_of(" \t\"") + 1);
    d.column_names.push_back(name);
  }
  const std::size_t p = d.column_names.size();
  require(p >= 1, Errc::parse_error, label + ": empty header");

  std::vector<double> vals;
  std::size_t n = 0, dropped = 0, row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != p) {
      throw Error(Errc::parse_error, label + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                         " cells, header has " + std::to_string(p));
    }
    bool missing = false;
    for (const auto& c : cells) missing = missing || is_missing_cell(c);
    if (missing) {
      ++dropped;
      continue;
    }
    for (std::size_t c = 0; c < p; ++c) vals.push_back(parse_double_cell(cells[c], row, c + 1));
    ++n;
  }
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vals[i * p + j];
  if (report) report->dropped_rows = dropped;
  return d;
}

inline StudyDataset read_dataset_csv(const std::string& path, DatasetReadReport* report = nullptr) {
  std::ifstream is(path);
  require(static_cast<bool>(is), Errc::io_error, "cannot open " + path);
  return read_dataset_csv(is, path, report);
}

inline void write_dataset_csv(std::ostream& os, const StudyDataset& d) {
  for (Eigen::Index j = 0; j < d.p(); ++j) {
    if (j) os << ',';
    if (static_cast<std::size_t>(j) < d.column_names.size())
      os << d.column_names[static_cast<std::size_t>(j)];
    else
      os << 'V' << j + 1;
  }
  os << '\n';
  write_matrix_csv(os, d.x);
}

inline void write_dataset_csv(const std::string& path, const StudyDataset& d) {
  std::ofstream os(path);
  require(static_cast<bool>(os), Errc::io_error, "cannot open " + path + " for writing");
  write_dataset_csv(os, d);
  require(static_cast<bool>(os), Errc::io_error, "write failed for " + path);
}

}  // namespace tcclime
