#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lsfm {

/// A parsed CSV file. `rows[k]` came from line `line_numbers[k]` (1-based,
/// header is line 1).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line_numbers;

  int column(const std::string& name) const;  // -1 if absent
  int require_column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);

/// Writes via a temporary file in the same directory followed by rename, so
/// readers never see a partial file.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Shortest round-trippable decimal form ("%.17g"); empty for absent values.
std::string format_double(double x);
std::string format_optional(const std::optional<double>& x);

double parse_double(const std::string& s, const std::string& what, long line);
long parse_long(const std::string& s, const std::string& what, long line);

}  // namespace lsfm
