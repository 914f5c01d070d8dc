#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "openscr/survey.hpp"

using namespace openscr;

namespace {

Timestamp at(const char* text) { return parse_timestamp(text); }

// One survey per secondary, every survey on a single day.
RobustDesign one_day_primaries(const std::vector<const char*>& dates) {
  std::vector<SurveyInfo> surveys;
  std::vector<OccasionAssignment> grouping;
  for (std::size_t k = 0; k < dates.size(); ++k) {
    const std::string id = "s" + std::to_string(k + 1);
    surveys.push_back({id, at(dates[k]), at(dates[k])});
    grouping.push_back({id, static_cast<int>(k + 1), 1});
  }
  return build_design(surveys, grouping);
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

}  // namespace

TEST(BuildDesign, IntervalsFromOccasionStartDates) {
  const auto design = one_day_primaries({"2010-06-18", "2010-11-09", "2011-04-06", "2011-06-09", "2011-11-09",
                                         "2012-02-07", "2012-04-11", "2013-04-09", "2013-11-09", "2014-04-22",
                                         "2019-03-14"});
  const std::vector<double> expected{0.4, 0.4, 0.2, 0.4, 0.2, 0.2, 1.0, 0.6, 0.4, 4.9};
  ASSERT_EQ(design.delta.size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_DOUBLE_EQ(round1(design.delta[k]), expected[k]) << k;
}

TEST(BuildDesign, MidpointsOneYearApart) {
  std::vector<SurveyInfo> surveys{{"a", at("2001-01-01"), at("2001-01-01")},
                                  {"b", at("2001-01-03"), at("2001-01-03")},
                                  {"c", at("2002-01-01T06:00"), at("2002-01-01T18:00")},
                                  {"d", at("2002-01-02"), at("2002-01-03T06:00")}};
  std::vector<OccasionAssignment> grouping{{"a", 1, 1}, {"b", 1, 2}, {"c", 2, 1}, {"d", 2, 2}};
  const auto design = build_design(surveys, grouping);
  ASSERT_EQ(design.delta.size(), 1u);
  EXPECT_NEAR(design.delta[0], 1.0, 1e-12);
  EXPECT_EQ(design.layout(), (std::vector<int>{2, 2}));
  EXPECT_EQ(design.flat_secondary(1, 1), 3);
}

TEST(BuildDesign, SinglePrimaryHasNoIntervals) {
  const auto design = one_day_primaries({"2010-06-18"});
  EXPECT_TRUE(design.delta.empty());
  EXPECT_EQ(design.n_primaries(), 1);
}

TEST(BuildDesign, Rejections) {
  std::vector<SurveyInfo> surveys{{"a", at("2001-01-01"), at("2001-01-01")}, {"b", at("2001-02-01"), at("2001-02-01")}};
  std::vector<OccasionAssignment> twice{{"a", 1, 1}, {"a", 1, 2}, {"b", 2, 1}};
  try {
    build_design(surveys, twice);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
  std::vector<OccasionAssignment> gap{{"a", 1, 1}, {"b", 3, 1}};
  EXPECT_THROW(build_design(surveys, gap), ValidationError);
  EXPECT_THROW(build_design(surveys, std::vector<OccasionAssignment>{}), ValidationError);
}

TEST(TraverseSegment, CrossesCellsAndIgnoresCorners) {
  const GridSpec grid{{0, 0}, 1000};
  const auto cells = traverse_segment(grid, {100, 500}, {1900, 500});
  EXPECT_EQ(cells, (std::vector<Cell>{{0, 0}, {1, 0}}));
  // Diagonal through the shared corner of four cells touches only two.
  const auto diag = traverse_segment(grid, {500, 500}, {1500, 1500});
  EXPECT_EQ(diag.size(), 2u);
  EXPECT_NE(std::find(diag.begin(), diag.end(), Cell{0, 0}), diag.end());
  EXPECT_NE(std::find(diag.begin(), diag.end(), Cell{1, 1}), diag.end());
  EXPECT_EQ(traverse_segment(grid, {10, 10}, {10, 10}), (std::vector<Cell>{{0, 0}}));
}

class Rasterize : public ::testing::Test {
 protected:
  void SetUp() override {
    surveys = {{"s1", at("2010-01-01T08:00"), at("2010-01-01T10:00")},
               {"s2", at("2010-01-02T08:00"), at("2010-01-02T10:00")},
               {"s3", at("2010-06-01T08:00"), at("2010-06-01T10:00")}};
    grouping = {{"s1", 1, 1}, {"s2", 1, 1}, {"s3", 2, 1}};
    design = build_design(surveys, grouping);
  }
  void track(const std::string& id, const char* t0, std::vector<Point> pts) {
    auto t = at(t0);
    for (const auto& p : pts) {
      tracks.push_back({id, t, p});
      t += std::chrono::minutes(1);
    }
  }
  static int cell_index(const TrapArray& a, Cell c) {
    auto it = std::find(a.cells.begin(), a.cells.end(), c);
    return it == a.cells.end() ? -1 : static_cast<int>(it - a.cells.begin());
  }
  std::vector<SurveyInfo> surveys;
  std::vector<OccasionAssignment> grouping;
  RobustDesign design;
  std::vector<TrackPoint> tracks;
  GridSpec grid{{0, 0}, 1000};
};

TEST_F(Rasterize, CountsSurveysOncePerCell) {
  // s1 crosses A=(0,0) then B=(1,0), leaves A and re-enters it.
  track("s1", "2010-01-01T08:00", {{100, 500}, {1500, 500}, {500, 500}});
  track("s2", "2010-01-02T08:00", {{200, 200}, {300, 300}});
  track("s3", "2010-06-01T08:00", {{1500, 1500}, {1600, 1600}});
  track("s4", "2010-06-01T08:00", {{5000, 5000}});
  RasterizeReport report;
  const auto traps = rasterize_effort(tracks, design, grid, &report);
  ASSERT_EQ(traps.size(), 3);
  const int a = cell_index(traps, {0, 0}), b = cell_index(traps, {1, 0}), c = cell_index(traps, {1, 1});
  ASSERT_GE(a, 0);
  ASSERT_GE(b, 0);
  ASSERT_GE(c, 0);
  EXPECT_EQ(traps.effort(a, 0, 0), 2);
  EXPECT_EQ(traps.effort(b, 0, 0), 1);
  EXPECT_EQ(traps.effort(c, 1, 0), 1);
  EXPECT_EQ(traps.effort(a, 1, 0), 0);
  EXPECT_EQ(traps.traps[static_cast<std::size_t>(a)], (Point{500, 500}));
  EXPECT_EQ(report.ungrouped_surveys, std::vector<std::string>{"s4"});
  for (int j = 0; j < traps.size(); ++j) EXPECT_GT(traps.effort.trap_total(j), 0);
}

TEST_F(Rasterize, SkipsSurveysWithOnePoint) {
  track("s1", "2010-01-01T08:00", {{100, 500}, {1500, 500}});
  track("s3", "2010-06-01T08:00", {{1500, 1500}});
  RasterizeReport report;
  const auto traps = rasterize_effort(tracks, design, grid, &report);
  EXPECT_EQ(report.skipped_surveys, std::vector<std::string>{"s3"});
  EXPECT_EQ(traps.size(), 2);
}

TEST_F(Rasterize, HistoriesKeepFirstSightingAtNearestTrap) {
  track("s1", "2010-01-01T08:00", {{100, 500}, {2500, 500}});
  track("s3", "2010-06-01T08:00", {{100, 500}, {1500, 500}});
  const auto traps = rasterize_effort(tracks, design, grid);
  const int a = cell_index(traps, {0, 0}), b = cell_index(traps, {1, 0}), c = cell_index(traps, {2, 0});
  std::vector<Sighting> sightings{
      {"dolphin", at("2010-01-01T09:30"), {2400, 400}},  // later sighting, same secondary
      {"dolphin", at("2010-01-01T08:30"), {1400, 600}},
      {"dolphin", at("2010-06-01T09:00"), {100, 100}},
      {"other", at("2010-03-01T09:00"), {100, 100}},     // off effort
      {"stray", at("2010-06-01T09:00"), {2500, 500}},    // nearest trap unsurveyed in that secondary
  };
  HistoriesReport report;
  const auto h = build_histories(sightings, traps, design, &report);
  ASSERT_EQ(h.n_individuals(), 1);
  EXPECT_EQ(h.id(0), "dolphin");
  EXPECT_EQ(h(0, 0, 0), b);
  EXPECT_EQ(h(0, 1, 0), a);
  EXPECT_EQ(report.off_effort, 1);
  EXPECT_EQ(report.zero_effort, 1);
  EXPECT_GE(c, 0);
  EXPECT_LE(h.detections(), static_cast<int>(sightings.size()));

  auto reversed = sightings;
  std::reverse(reversed.begin(), reversed.end());
  const auto h2 = build_histories(reversed, traps, design);
  EXPECT_EQ(h2(0, 0, 0), h(0, 0, 0));
  EXPECT_EQ(h2(0, 1, 0), h(0, 1, 0));

  const auto empty = build_histories(std::vector<Sighting>{}, traps, design);
  EXPECT_EQ(empty.n_individuals(), 0);
}

TEST(NearestTrap, DistanceAndTies) {
  const std::vector<Point> traps{{0, 0}, {150, 150}};
  EXPECT_EQ(nearest_trap(traps, {100, 100}), 1);
  EXPECT_NEAR(distance({100, 100}, {150, 150}), 70.7107, 1e-4);
  EXPECT_NEAR(distance({100, 100}, {0, 0}), 141.4214, 1e-4);
  bool tied = false;
  EXPECT_EQ(nearest_trap(traps, {75, 75}, &tied), 0);
  EXPECT_TRUE(tied);
}
