#include <sstream>

#include <gtest/gtest.h>

#include "openscr/common.hpp"
#include "openscr/csv.hpp"
#include "openscr/timeutil.hpp"

using namespace openscr;

TEST(Timestamp, ParsesDateAndDateTime) {
  const auto a = parse_timestamp("2013-05-09");
  const auto b = parse_timestamp("2013-05-09T12:00:00Z");
  const auto c = parse_timestamp("2013-05-09 12:00");
  EXPECT_EQ(b, c);
  EXPECT_EQ((b - a).count(), 12 * 3600);
  EXPECT_EQ(format_timestamp(b), "2013-05-09T12:00:00Z");
}

TEST(Timestamp, RejectsMalformed) {
  EXPECT_THROW(parse_timestamp("2013/05/09"), ValidationError);
  EXPECT_THROW(parse_timestamp("2013-02-30"), ValidationError);
  EXPECT_THROW(parse_timestamp("2013-05-09T25:00"), ValidationError);
  EXPECT_THROW(parse_timestamp("2013-05-09Tjunk"), ValidationError);
}

TEST(Timestamp, ShortDateLayout) {
  EXPECT_EQ(format_short_date(parse_timestamp("2013-05-09")), "09-May-13");
  EXPECT_EQ(format_short_date(parse_timestamp("2008-12-31T23:59:59Z")), "31-Dec-08");
}

TEST(Timestamp, YearsUseJulianYear) {
  EXPECT_DOUBLE_EQ(years_between(parse_timestamp("2000-01-01"), parse_timestamp("2000-01-01") + std::chrono::seconds(31557600)),
                   1.0);
}

TEST(Csv, ParsesQuotedFieldsAndSkipsComments) {
  std::istringstream in("# note\nid,name\n1,\"a, b\"\n\n2,c\n");
  const auto t = csv::Table::parse(in, "mem.csv");
  ASSERT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cell(0, t.column("name")), "a, b");
  EXPECT_EQ(t.integer(1, 0), 2);
  EXPECT_EQ(t.line_of(1), 5u);
}

TEST(Csv, DiagnosticsCarryLineNumbers) {
  std::istringstream in("a,b\n1,2\n3\n");
  try {
    csv::Table::parse(in, "bad.csv");
    FAIL() << "expected a ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv:3"), std::string::npos) << e.what();
  }
  std::istringstream in2("a\nxyz\n");
  const auto t = csv::Table::parse(in2, "num.csv");
  EXPECT_THROW(t.number(0, 0), ValidationError);
  EXPECT_THROW(t.column("missing"), ValidationError);
}

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(csv::fmt_num(0.1), "0.1");
  EXPECT_EQ(csv::fmt_num(0.0), "0");
  EXPECT_EQ(csv::fmt_num(std::nan("")), "NA");
  EXPECT_EQ(std::stod(csv::fmt_exact(0.1 + 0.2)), 0.1 + 0.2);
}
