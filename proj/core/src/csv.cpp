#include "openscr/csv.hpp"

#include <charconv>
#include <istream>

#include <fmt/format.h>

#include "openscr/common.hpp"

namespace openscr::csv {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Splits one record; supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  out.push_back(was_quoted ? field : trim(field));
  return out;
}

}  // namespace

Table Table::parse(std::istream& in, std::string source_name) {
  Table t;
  t.source_ = std::move(source_name);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || line.front() == '#') continue;
    auto fields = split_record(line);
    if (!have_header) {
      t.header_ = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header_.size()) {
      throw ValidationError(fmt::format("{}:{}: expected {} fields, found {}", t.source_, lineno,
                                        t.header_.size(), fields.size()));
    }
    t.rows_.push_back(std::move(fields));
    t.lines_.push_back(lineno);
  }
  if (!have_header) throw ValidationError(fmt::format("{}: missing header row", t.source_));
  return t;
}

Table Table::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  return parse(in, path.string());
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  throw ValidationError(fmt::format("{}: missing required column '{}'", source_, name));
}

double Table::number(std::size_t row, std::size_t col) const {
  const std::string& s = rows_[row][col];
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(row, fmt::format("column '{}': '{}' is not a finite number", header_[col], s));
  }
  return v;
}

long Table::integer(std::size_t row, std::size_t col) const {
  const std::string& s = rows_[row][col];
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(row, fmt::format("column '{}': '{}' is not an integer", header_[col], s));
  }
  return v;
}

void Table::fail(std::size_t row, std::string_view message) const {
  throw ValidationError(fmt::format("{}:{}: {}", source_, lines_[row], message));
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (v == 0.0) return "0";
  return fmt::format("{:.15g}", v);
}

std::string fmt_exact(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  return fmt::format("{:.17g}", v);
}

Writer::Writer(const std::filesystem::path& path, std::vector<std::string> columns)
    : path_(path), out_(path, std::ios::binary), n_columns_(columns.size()) {
  if (!out_) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
}

Writer& Writer::add(std::string_view text) {
  if (filled_) out_ << ',';
  if (text.find_first_of(",\"\n") != std::string_view::npos) {
    out_ << '"';
    for (char c : text) {
      if (c == '"') out_ << '"';
      out_ << c;
    }
    out_ << '"';
  } else {
    out_ << text;
  }
  ++filled_;
  return *this;
}

Writer& Writer::add(double value) { return add(std::string_view(fmt_num(value))); }

Writer& Writer::add(long value) { return add(std::string_view(std::to_string(value))); }

void Writer::end_row() {
  if (filled_ != n_columns_) {
    throw Error(fmt::format("{}: row has {} fields, header has {}", path_.string(), filled_, n_columns_));
  }
  out_ << '\n';
  filled_ = 0;
}

}  // namespace openscr::csv
