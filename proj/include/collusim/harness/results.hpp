#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace collusim::harness {

using Cell = std::variant<std::string, long long, double>;

/// A CSV table with a fixed header. Doubles are written with 17 significant digits.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);  // throws std::invalid_argument on a width mismatch
};

std::string format_cell(const Cell& cell);
void write_csv(std::ostream& os, const Table& table);
/// Writes via a temporary file and rename. Throws IoError.
void write_csv(const std::filesystem::path& path, const Table& table);

/// Parses a CSV written by write_csv into strings (no quoting support needed for our fields).
std::vector<std::vector<std::string>> read_csv(std::istream& is);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace collusim::harness
