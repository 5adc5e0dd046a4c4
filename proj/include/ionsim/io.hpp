#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ionsim/common.hpp"

namespace ionsim {

/// Shortest round-trip decimal representation ("%.17g").
std::string format_double(double value);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);

/// Minimal RFC-4180 table: mandatory header row, comma separated, fields
/// may be double-quoted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
  std::vector<double> numeric_column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Writes a CSV with a trailing config_hash column on every row when the
/// hash is non-empty.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header, std::string config_hash = "");
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
  std::size_t width_;
  std::string hash_;
};

std::string csv_escape(const std::string& field);

/// Flat "key = value" text; '#' starts a comment. Later keys override.
std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& origin);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ionsim
