#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fbsvie {

using CsvCell = std::variant<double, std::int64_t, std::string>;

// Rectangular table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvCell>> rows;

  // Columns of equal length, written side by side.
  static CsvTable from_columns(const std::vector<std::pair<std::string, std::vector<double>>>& columns);

  void add_row(std::vector<CsvCell> row);
  std::size_t nan_count() const;
};

// Reals with 17 significant digits, NaN as "nan", infinities as "inf"/"-inf".
std::string format_real(double v);

std::string to_csv(const CsvTable& table);

// Throws IoError when the file cannot be written.
void write_csv(const CsvTable& table, const std::filesystem::path& path);

}  // namespace fbsvie
