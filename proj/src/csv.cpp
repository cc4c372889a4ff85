#include "fbsvie/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fbsvie/error.hpp"

namespace fbsvie {

CsvTable CsvTable::from_columns(const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
  CsvTable t;
  std::size_t rows = columns.empty() ? 0 : columns.front().second.size();
  for (const auto& [name, values] : columns) {
    if (values.size() != rows) throw ValidationError("column '" + name + "' has a different length");
    t.header.push_back(name);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<CsvCell> row;
    row.reserve(columns.size());
    for (const auto& col : columns) row.emplace_back(col.second[r]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

void CsvTable::add_row(std::vector<CsvCell> row) {
  if (row.size() != header.size())
    throw ValidationError("row has " + std::to_string(row.size()) + " cells, header has " +
                          std::to_string(header.size()));
  rows.push_back(std::move(row));
}

std::size_t CsvTable::nan_count() const {
  std::size_t count = 0;
  for (const auto& row : rows)
    for (const auto& cell : row)
      if (const double* d = std::get_if<double>(&cell); d && std::isnan(*d)) ++count;
  return count;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string format_cell(const CsvCell& cell) {
  if (const double* d = std::get_if<double>(&cell)) return format_real(*d);
  if (const std::int64_t* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  return quote(std::get<std::string>(cell));
}

}  // namespace

std::string to_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.header.size(); ++c) out += (c ? "," : "") + quote(table.header[c]);
  out += "\r\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_cell(row[c]);
    out += "\r\n";
  }
  return out;
}

void write_csv(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::string text = to_csv(table);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace fbsvie
