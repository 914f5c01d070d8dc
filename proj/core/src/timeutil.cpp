#include "openscr/timeutil.hpp"

#include <array>
#include <charconv>

#include <fmt/format.h>

#include "openscr/common.hpp"

namespace openscr {
namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) throw ValidationError(fmt::format("bad timestamp '{}'", text));
  int v = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, v);
  if (ec != std::errc() || ptr != first + len) throw ValidationError(fmt::format("bad timestamp '{}'", text));
  return v;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) throw ValidationError(fmt::format("bad timestamp '{}'", text));
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  const int y = read_int(text, 0, 4);
  expect(text, 4, '-');
  const int mo = read_int(text, 5, 2);
  expect(text, 7, '-');
  const int d = read_int(text, 8, 2);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw ValidationError(fmt::format("invalid date in '{}'", text));
  int hh = 0, mm = 0, ss = 0;
  std::size_t pos = 10;
  if (pos < text.size()) {
    if (text[pos] != 'T' && text[pos] != ' ') throw ValidationError(fmt::format("bad timestamp '{}'", text));
    hh = read_int(text, pos + 1, 2);
    expect(text, pos + 3, ':');
    mm = read_int(text, pos + 4, 2);
    pos += 6;
    if (pos < text.size() && text[pos] == ':') {
      ss = read_int(text, pos + 1, 2);
      pos += 3;
    }
    if (pos < text.size() && text[pos] == 'Z') ++pos;
    if (pos != text.size()) throw ValidationError(fmt::format("bad timestamp '{}'", text));
    if (hh > 23 || mm > 59 || ss > 60) throw ValidationError(fmt::format("invalid time in '{}'", text));
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss hms{t - day_start};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                     hms.minutes().count(), hms.seconds().count());
}

std::string format_short_date(Timestamp t) {
  using namespace std::chrono;
  static constexpr std::array<const char*, 12> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                          "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  const year_month_day ymd{floor<days>(t)};
  return fmt::format("{:02d}-{}-{:02d}", static_cast<unsigned>(ymd.day()),
                     kMonths[static_cast<unsigned>(ymd.month()) - 1], static_cast<int>(ymd.year()) % 100);
}

}  // namespace openscr
