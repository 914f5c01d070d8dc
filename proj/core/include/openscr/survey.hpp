#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openscr/common.hpp"
#include "openscr/timeutil.hpp"

namespace openscr {

struct Sighting {
  std::string individual_id;
  Timestamp time;
  Point location;
};

struct TrackPoint {
  std::string survey_id;
  Timestamp time;
  Point location;
};

/// Time span covered by one survey (trackline).
struct SurveyInfo {
  std::string id;
  Timestamp start;
  Timestamp end;
};

/// One row of the occasion grouping: survey -> (primary, secondary), 1-based.
struct OccasionAssignment {
  std::string survey_id;
  int primary = 0;
  int secondary = 0;
};

struct SecondaryOccasion {
  std::vector<std::string> surveys;
  std::vector<SurveyInfo> spans;  ///< time span of each survey, same order
  Timestamp start;
  Timestamp end;
};

struct PrimaryOccasion {
  std::vector<SecondaryOccasion> secondaries;
  Timestamp first;  ///< earliest survey start
  Timestamp last;   ///< latest survey end
  Timestamp midpoint() const { return first + (last - first) / 2; }
};

/// Robust design: ordered primaries, each an ordered list of secondaries.
/// `delta[k]` is the time in years between the mid-points of primaries k
/// and k+1.
struct RobustDesign {
  std::vector<PrimaryOccasion> primaries;
  std::vector<double> delta;

  int n_primaries() const { return static_cast<int>(primaries.size()); }
  int n_secondaries(int k) const { return static_cast<int>(primaries[k].secondaries.size()); }
  int total_secondaries() const;
  /// Flat index of secondary (k, l), both 0-based.
  int flat_secondary(int k, int l) const;
  /// Secondary counts per primary.
  std::vector<int> layout() const;
  /// Years from the first primary's mid-point to each primary's mid-point.
  std::vector<double> midpoint_years() const;
};

RobustDesign build_design(std::span<const SurveyInfo> surveys, std::span<const OccasionAssignment> grouping);

/// First/last timestamp of each survey's track, sorted by survey id.
std::vector<SurveyInfo> survey_spans(std::span<const TrackPoint> tracks);

/// Integer cell address on the effort grid.
struct Cell {
  long ix = 0;
  long iy = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct GridSpec {
  Point origin;
  double cell_size = 1000.0;

  Cell cell_of(const Point& p) const;
  Point center(const Cell& c) const;
};

/// Cells whose interior the segment a-b passes through. Cells touched only
/// at a corner are not included. A degenerate segment yields its own cell.
std::vector<Cell> traverse_segment(const GridSpec& grid, const Point& a, const Point& b);

/// Effort counts u[j][k][l]: number of distinct surveys of secondary (k, l)
/// whose path intersects trap cell j.
class EffortArray {
 public:
  EffortArray() = default;
  EffortArray(int n_traps, std::vector<int> secondaries_per_primary);

  int n_traps() const { return n_traps_; }
  int n_primaries() const { return static_cast<int>(layout_.size()); }
  int n_secondaries(int k) const { return layout_[k]; }
  int total_secondaries() const { return total_; }
  const std::vector<int>& layout() const { return layout_; }
  int flat_secondary(int k, int l) const { return offsets_[k] + l; }

  int& operator()(int j, int k, int l) { return counts_[static_cast<std::size_t>(flat_secondary(k, l)) * n_traps_ + j]; }
  int operator()(int j, int k, int l) const {
    return counts_[static_cast<std::size_t>(flat_secondary(k, l)) * n_traps_ + j];
  }
  /// Effort of trap j in flat secondary s.
  int at(int j, int s) const { return counts_[static_cast<std::size_t>(s) * n_traps_ + j]; }
  int trap_total(int j) const;

 private:
  int n_traps_ = 0;
  int total_ = 0;
  std::vector<int> layout_;
  std::vector<int> offsets_;
  std::vector<int> counts_;
};

struct TrapArray {
  std::vector<Point> traps;  ///< cell centers, meters
  std::vector<Cell> cells;
  GridSpec grid;
  EffortArray effort;

  int size() const { return static_cast<int>(traps.size()); }
};

/// Capture histories: omega(i, k, l) is the trap index of individual i's
/// first sighting in secondary (k, l), or kNone.
class CaptureHistories {
 public:
  static constexpr int kNone = -1;

  CaptureHistories() = default;
  explicit CaptureHistories(std::vector<int> secondaries_per_primary);

  int n_individuals() const { return static_cast<int>(ids_.size()); }
  int n_primaries() const { return static_cast<int>(layout_.size()); }
  int n_secondaries(int k) const { return layout_[k]; }
  int total_secondaries() const { return total_; }
  const std::vector<int>& layout() const { return layout_; }
  int flat_secondary(int k, int l) const { return offsets_[k] + l; }

  const std::string& id(int i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }

  /// Appends an individual with no detections; returns its index.
  int add_individual(std::string id);
  int& operator()(int i, int k, int l) { return omega_[static_cast<std::size_t>(i) * total_ + flat_secondary(k, l)]; }
  int operator()(int i, int k, int l) const {
    return omega_[static_cast<std::size_t>(i) * total_ + flat_secondary(k, l)];
  }
  int at(int i, int s) const { return omega_[static_cast<std::size_t>(i) * total_ + s]; }
  int detections() const;

 private:
  std::vector<std::string> ids_;
  std::vector<int> layout_;
  std::vector<int> offsets_;
  int total_ = 0;
  std::vector<int> omega_;
};

struct RasterizeReport {
  std::vector<std::string> skipped_surveys;  ///< fewer than two track points
  std::vector<std::string> ungrouped_surveys;
};

TrapArray rasterize_effort(std::span<const TrackPoint> tracks, const RobustDesign& design, const GridSpec& grid,
                           RasterizeReport* report = nullptr);

struct HistoriesReport {
  int off_effort = 0;        ///< timestamp outside every survey span
  int ambiguous = 0;         ///< timestamp inside surveys of several secondaries
  int zero_effort = 0;       ///< nearest trap had no effort in that secondary
  int nearest_trap_ties = 0;
  int retained = 0;
};

CaptureHistories build_histories(std::span<const Sighting> sightings, const TrapArray& traps,
                                 const RobustDesign& design, HistoriesReport* report = nullptr);

/// Index of the trap nearest to p; ties go to the lowest index.
int nearest_trap(std::span<const Point> traps, const Point& p, bool* tied = nullptr);

// CSV readers for the survey inputs (line-numbered diagnostics).
std::vector<Sighting> read_sightings(const std::string& path);
std::vector<TrackPoint> read_tracks(const std::string& path);
std::vector<OccasionAssignment> read_occasions(const std::string& path);

}  // namespace openscr
