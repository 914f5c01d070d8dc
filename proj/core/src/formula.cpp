#include "openscr/formula.hpp"

#include <cctype>
#include <charconv>

#include <fmt/format.h>

#include "openscr/common.hpp"

namespace openscr {
namespace {

std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  return true;
}

std::vector<std::string> split_top(std::string_view s, char sep, std::string_view whole) {
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') {
      if (--depth < 0) throw ValidationError(fmt::format("unbalanced parentheses in formula '{}'", whole));
    }
    if (s[i] == sep && depth == 0) {
      out.push_back(strip(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (depth != 0) throw ValidationError(fmt::format("unbalanced parentheses in formula '{}'", whole));
  out.push_back(strip(s.substr(start)));
  return out;
}

bool parse_int(std::string_view s, int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

Term parse_smooth(std::string_view inner, std::string_view whole) {
  Term t;
  t.kind = Term::Kind::smooth;
  for (const auto& arg : split_top(inner, ',', whole)) {
    if (arg.empty()) throw ValidationError(fmt::format("empty argument in smooth of formula '{}'", whole));
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      const auto name = strip(std::string_view(arg).substr(0, eq));
      const auto value = strip(std::string_view(arg).substr(eq + 1));
      if ((name != "df" && name != "k") || !parse_int(value, t.df)) {
        throw ValidationError(fmt::format("bad smooth argument '{}' in formula '{}'", arg, whole));
      }
      continue;
    }
    int df = 0;
    if (parse_int(arg, df)) {
      t.df = df;
    } else if (is_identifier(arg)) {
      if (t.df != 0) throw ValidationError(fmt::format("smooth variables must precede df in '{}'", whole));
      t.variables.push_back(arg);
    } else {
      throw ValidationError(fmt::format("bad smooth argument '{}' in formula '{}'", arg, whole));
    }
  }
  if (t.variables.empty() || t.variables.size() > 2) {
    throw ValidationError(fmt::format("smooths take one or two variables in formula '{}'", whole));
  }
  if (t.df < 0) throw ValidationError(fmt::format("negative df in formula '{}'", whole));
  return t;
}

}  // namespace

std::string Term::label() const {
  if (!is_smooth()) return variables.front();
  std::string s = "s(";
  for (std::size_t i = 0; i < variables.size(); ++i) s += (i ? "," : "") + variables[i];
  if (df > 0) s += fmt::format(",{}", df);
  return s + ")";
}

std::string Term::key() const {
  if (!is_smooth()) return variables.front();
  std::string s = "s(";
  for (std::size_t i = 0; i < variables.size(); ++i) s += (i ? "," : "") + variables[i];
  return s + ")";
}

Formula Formula::parse(std::string_view text) {
  std::string body = strip(text);
  if (!body.empty() && body.front() == '~') body = strip(std::string_view(body).substr(1));
  Formula f;
  if (body.empty()) return f;
  for (const auto& piece : split_top(body, '+', text)) {
    if (piece.empty()) throw ValidationError(fmt::format("empty term in formula '{}'", text));
    if (piece == "1") continue;
    Term t;
    if (piece.size() > 3 && piece.rfind("s(", 0) == 0 && piece.back() == ')') {
      t = parse_smooth(std::string_view(piece).substr(2, piece.size() - 3), text);
    } else if (is_identifier(piece)) {
      t.variables.push_back(piece);
    } else {
      throw ValidationError(fmt::format("cannot parse term '{}' in formula '{}'", piece, text));
    }
    if (f.contains(t.key())) throw ValidationError(fmt::format("duplicate term '{}' in formula '{}'", t.key(), text));
    f.terms.push_back(std::move(t));
  }
  return f;
}

std::string Formula::to_string() const {
  if (terms.empty()) return "1";
  std::string s;
  for (std::size_t i = 0; i < terms.size(); ++i) s += (i ? " + " : "") + terms[i].label();
  return s;
}

bool Formula::contains(const std::string& key) const { return find(key) != nullptr; }

Term* Formula::find(const std::string& key) {
  for (auto& t : terms)
    if (t.key() == key) return &t;
  return nullptr;
}

const Term* Formula::find(const std::string& key) const {
  for (const auto& t : terms)
    if (t.key() == key) return &t;
  return nullptr;
}

}  // namespace openscr
