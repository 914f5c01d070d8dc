#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace openscr {

/// One right-hand-side term: a covariate (factor or linear, decided by the
/// covariate's type) or a thin plate smooth `s(v1[, v2], df)`.
struct Term {
  enum class Kind { covariate, smooth };

  Kind kind = Kind::covariate;
  std::vector<std::string> variables;
  int df = 0;  ///< smooths only; 0 means "not fixed yet" (selection menus)

  bool is_smooth() const { return kind == Kind::smooth; }
  /// `stratum`, `s(x,y,20)`
  std::string label() const;
  /// Identity ignoring df: `stratum`, `s(x,y)`
  std::string key() const;

  friend bool operator==(const Term&, const Term&) = default;
};

/// Sum of terms plus an implicit intercept. Parses `1`, `~ 1`,
/// `stratum + openness + primary`, `s(x, y, 20) + s(avg_salinity, df = 5)`.
struct Formula {
  std::vector<Term> terms;

  static Formula parse(std::string_view text);
  std::string to_string() const;

  bool contains(const std::string& key) const;
  Term* find(const std::string& key);
  const Term* find(const std::string& key) const;

  friend bool operator==(const Formula&, const Formula&) = default;
};

}  // namespace openscr
