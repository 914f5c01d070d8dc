#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace openscr::csv {

/// A parsed CSV file with a header row. Row numbers in diagnostics are
/// 1-based file line numbers.
class Table {
 public:
  static Table parse(std::istream& in, std::string source_name);
  static Table read(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  /// Column index; throws ValidationError naming the file if missing.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  double number(std::size_t row, std::size_t col) const;
  long integer(std::size_t row, std::size_t col) const;

  std::size_t line_of(std::size_t row) const { return lines_[row]; }
  const std::string& source() const { return source_; }

  /// Throws ValidationError("<source>:<line>: <message>").
  [[noreturn]] void fail(std::size_t row, std::string_view message) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

/// Formats a double with 15 significant digits (diffable artifacts).
std::string fmt_num(double v);
/// Formats with 17 significant digits; round-trips exactly.
std::string fmt_exact(double v);

/// Minimal CSV writer with a fixed column order.
class Writer {
 public:
  Writer(const std::filesystem::path& path, std::vector<std::string> columns);

  Writer& add(std::string_view text);
  Writer& add(double value);
  Writer& add(long value);
  Writer& add(int value) { return add(static_cast<long>(value)); }
  Writer& add(std::size_t value) { return add(static_cast<long>(value)); }
  void end_row();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t n_columns_;
  std::size_t filled_ = 0;
};

}  // namespace openscr::csv
