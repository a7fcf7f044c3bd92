#pragma once

#include <string>
#include <vector>

namespace ehub {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const; // -1 if absent
  int require_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Shortest round-trip decimal representation; used everywhere a double is
// written to CSV/JSON so reruns are byte-identical.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// FNV-1a over the file bytes, as a 16-digit hex string.
std::string file_hash_hex(const std::string& path);
std::string bytes_hash_hex(const std::string& bytes);

} // namespace ehub
