#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "lps/types.hpp"

namespace lps {

class CsvParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric table read from an RFC-4180 CSV file with a mandatory header row.
/// Missing or non-numeric cells are rejected (complete cases only).
class CsvTable {
 public:
  static CsvTable read_file(const std::string& path);
  static CsvTable from_string(const std::string& text);

  Index rows() const { return rows_; }
  Index cols() const { return static_cast<Index>(header_.size()); }
  const std::vector<std::string>& header() const { return header_; }
  bool has_column(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> columns_;
  Index rows_ = 0;
};

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double x);

/// Write one CSV file; columns are parallel vectors under `header`.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<const std::vector<double>*>& columns);

}  // namespace lps
