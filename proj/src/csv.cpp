#include "lps/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lps {

namespace {

// RFC 4180 record reader: handles quoted fields, embedded commas/newlines and
// doubled quotes. Returns false at end of input.
bool read_record(const std::string& text, std::size_t& pos, std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string field;
  bool quoted = false;
  for (;;) {
    if (pos >= text.size()) {
      fields.push_back(std::move(field));
      return true;
    }
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
        } else {
          quoted = false;
          ++pos;
        }
      } else {
        field.push_back(c);
        ++pos;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        ++pos;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        ++pos;
        break;
      case '\r':
        if (pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
        [[fallthrough]];
      case '\n':
        ++pos;
        fields.push_back(std::move(field));
        return true;
      default:
        field.push_back(c);
        ++pos;
    }
  }
}

double parse_cell(const std::string& cell, Index row, const std::string& name) {
  if (cell.empty())
    throw CsvParseError("csv: missing value in column '" + name + "' at data row " +
                        std::to_string(row + 1));
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE)
    throw CsvParseError("csv: non-numeric value '" + cell + "' in column '" + name +
                        "' at data row " + std::to_string(row + 1));
  return value;
}

}  // namespace

CsvTable CsvTable::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvParseError("csv: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

CsvTable CsvTable::from_string(const std::string& text) {
  CsvTable table;
  std::size_t pos = 0;
  std::vector<std::string> fields;
  if (!read_record(text, pos, fields) || (fields.size() == 1 && fields[0].empty()))
    throw CsvParseError("csv: missing header row");
  table.header_ = fields;
  table.columns_.resize(fields.size());

  while (read_record(text, pos, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
    if (fields.size() != table.header_.size())
      throw CsvParseError("csv: row " + std::to_string(table.rows_ + 1) + " has " +
                          std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(table.header_.size()));
    for (std::size_t c = 0; c < fields.size(); ++c)
      table.columns_[c].push_back(parse_cell(fields[c], table.rows_, table.header_[c]));
    ++table.rows_;
  }
  if (table.rows_ == 0) throw CsvParseError("csv: no data rows");
  return table;
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header_.size(); ++c)
    if (header_[c] == name) return columns_[c];
  throw CsvParseError("csv: no column named '" + name + "'");
}

std::string format_double(double x) {
  // shortest representation that round-trips
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<const std::vector<double>*>& columns) {
  if (header.size() != columns.size())
    throw std::invalid_argument("write_csv: header/column count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out << ',';
    out << header[c];
  }
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front()->size();
  for (const auto* col : columns)
    if (col->size() != rows) throw std::invalid_argument("write_csv: ragged columns");
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out << ',';
      out << format_double((*columns[c])[r]);
    }
    out << '\n';
  }
}

}  // namespace lps
