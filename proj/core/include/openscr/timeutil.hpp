#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace openscr {

using Timestamp = std::chrono::sys_seconds;

inline constexpr double kSecondsPerYear = 365.25 * 86400.0;

/// Parses UTC `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS][Z]` or the same with a
/// space separator. Throws ValidationError on malformed input.
Timestamp parse_timestamp(std::string_view text);

/// `YYYY-MM-DDTHH:MM:SSZ`
std::string format_timestamp(Timestamp t);

/// `DD-Mon-YY`, the layout used in the occasion and survival tables.
std::string format_short_date(Timestamp t);

inline double years_between(Timestamp a, Timestamp b) {
  return static_cast<double>((b - a).count()) / kSecondsPerYear;
}

}  // namespace openscr
