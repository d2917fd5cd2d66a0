#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace capmax::csv {

/// Minimal numeric-friendly CSV table. Lines starting with '#' are metadata
/// comments and are preserved in `comments` (without the leading '#').
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
  double number(std::size_t row, const std::string& name) const;
};

Table read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Table& table);

std::string format_double(double value);
std::vector<std::string> format_row(const std::vector<double>& values);

}  // namespace capmax::csv
