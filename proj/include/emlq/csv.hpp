#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace emlq {

// 17 significant digits, locale independent.
std::string format_number(double v);
std::string format_number(std::int64_t v);
std::string format_number(std::uint64_t v);
inline std::string format_number(int v) { return format_number(static_cast<std::int64_t>(v)); }

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add(std::vector<std::string> row);
  void add_numbers(const std::vector<double>& row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  // Throws ConfigError if the file cannot be written.
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace emlq
