#include "openscr/survey.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "openscr/csv.hpp"
#include "openscr/parallel.hpp"

namespace openscr {

int RobustDesign::total_secondaries() const {
  int n = 0;
  for (const auto& p : primaries) n += static_cast<int>(p.secondaries.size());
  return n;
}

int RobustDesign::flat_secondary(int k, int l) const {
  int s = 0;
  for (int m = 0; m < k; ++m) s += n_secondaries(m);
  return s + l;
}

std::vector<int> RobustDesign::layout() const {
  std::vector<int> out;
  out.reserve(primaries.size());
  for (const auto& p : primaries) out.push_back(static_cast<int>(p.secondaries.size()));
  return out;
}

std::vector<double> RobustDesign::midpoint_years() const {
  std::vector<double> out;
  if (primaries.empty()) return out;
  const Timestamp t0 = primaries.front().midpoint();
  for (const auto& p : primaries) out.push_back(years_between(t0, p.midpoint()));
  return out;
}

RobustDesign build_design(std::span<const SurveyInfo> surveys, std::span<const OccasionAssignment> grouping) {
  std::map<std::string, const SurveyInfo*> by_id;
  for (const auto& s : surveys) by_id[s.id] = &s;

  std::map<std::string, std::pair<int, int>> seen;
  int n_primary = 0;
  for (const auto& g : grouping) {
    if (g.primary < 1 || g.secondary < 1) {
      throw ValidationError(fmt::format("survey '{}': primary and secondary must be >= 1", g.survey_id));
    }
    if (!seen.emplace(g.survey_id, std::pair{g.primary, g.secondary}).second) {
      throw ValidationError(fmt::format("survey '{}' is assigned to more than one occasion", g.survey_id));
    }
    if (!by_id.contains(g.survey_id)) {
      throw ValidationError(fmt::format("survey '{}' has no track points", g.survey_id));
    }
    n_primary = std::max(n_primary, g.primary);
  }
  if (n_primary == 0) throw ValidationError("occasion grouping is empty");

  // primary -> secondary -> survey ids (sorted for determinism)
  std::vector<std::map<int, std::vector<std::string>>> nested(n_primary);
  for (const auto& [id, ps] : seen) nested[ps.first - 1][ps.second].push_back(id);

  RobustDesign design;
  for (int k = 0; k < n_primary; ++k) {
    if (nested[k].empty()) throw ValidationError(fmt::format("primary occasion {} has no surveys", k + 1));
    const int n_sec = nested[k].rbegin()->first;
    PrimaryOccasion primary;
    for (int l = 1; l <= n_sec; ++l) {
      auto it = nested[k].find(l);
      if (it == nested[k].end()) {
        throw ValidationError(fmt::format("secondary occasion {} of primary {} has no surveys", l, k + 1));
      }
      SecondaryOccasion sec;
      sec.surveys = it->second;
      sec.start = Timestamp::max();
      sec.end = Timestamp::min();
      for (const auto& id : sec.surveys) {
        sec.spans.push_back(*by_id[id]);
        sec.start = std::min(sec.start, by_id[id]->start);
        sec.end = std::max(sec.end, by_id[id]->end);
      }
      if (!primary.secondaries.empty() && sec.start < primary.secondaries.back().end) {
        throw ValidationError(
            fmt::format("secondary occasions {} and {} of primary {} overlap or are out of order", l - 1, l, k + 1));
      }
      primary.secondaries.push_back(std::move(sec));
    }
    primary.first = primary.secondaries.front().start;
    primary.last = primary.secondaries.back().end;
    design.primaries.push_back(std::move(primary));
  }
  for (int k = 0; k + 1 < n_primary; ++k) {
    const double d = years_between(design.primaries[k].midpoint(), design.primaries[k + 1].midpoint());
    if (!(d > 0.0)) {
      throw ValidationError(fmt::format("primary occasions {} and {} are not in time order", k + 1, k + 2));
    }
    design.delta.push_back(d);
  }
  return design;
}

std::vector<SurveyInfo> survey_spans(std::span<const TrackPoint> tracks) {
  std::map<std::string, SurveyInfo> spans;
  for (const auto& p : tracks) {
    auto [it, inserted] = spans.try_emplace(p.survey_id, SurveyInfo{p.survey_id, p.time, p.time});
    if (!inserted) {
      it->second.start = std::min(it->second.start, p.time);
      it->second.end = std::max(it->second.end, p.time);
    }
  }
  std::vector<SurveyInfo> out;
  out.reserve(spans.size());
  for (auto& [id, info] : spans) out.push_back(info);
  return out;
}

Cell GridSpec::cell_of(const Point& p) const {
  return {static_cast<long>(std::floor((p.x - origin.x) / cell_size)),
          static_cast<long>(std::floor((p.y - origin.y) / cell_size))};
}

Point GridSpec::center(const Cell& c) const {
  return {origin.x + (static_cast<double>(c.ix) + 0.5) * cell_size,
          origin.y + (static_cast<double>(c.iy) + 0.5) * cell_size};
}

std::vector<Cell> traverse_segment(const GridSpec& grid, const Point& a, const Point& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  if (dx == 0.0 && dy == 0.0) return {grid.cell_of(a)};

  // Parameters where the segment crosses grid lines; pieces of positive
  // length between consecutive crossings each lie inside a single cell.
  std::vector<double> ts{0.0, 1.0};
  auto add_crossings = [&](double from, double to, double org, double delta) {
    if (delta == 0.0) return;
    const double lo = std::min(from, to);
    const double hi = std::max(from, to);
    const long first = static_cast<long>(std::ceil((lo - org) / grid.cell_size));
    const long last = static_cast<long>(std::floor((hi - org) / grid.cell_size));
    for (long i = first; i <= last; ++i) {
      const double t = (org + static_cast<double>(i) * grid.cell_size - from) / delta;
      if (t > 0.0 && t < 1.0) ts.push_back(t);
    }
  };
  add_crossings(a.x, b.x, grid.origin.x, dx);
  add_crossings(a.y, b.y, grid.origin.y, dy);
  std::sort(ts.begin(), ts.end());

  const double length = std::hypot(dx, dy);
  const double min_piece = 1e-9 * grid.cell_size / length;
  std::vector<Cell> cells;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    if (ts[i + 1] - ts[i] <= min_piece) continue;
    const double tm = 0.5 * (ts[i] + ts[i + 1]);
    const Cell c = grid.cell_of({a.x + tm * dx, a.y + tm * dy});
    if (cells.empty() || cells.back() != c) cells.push_back(c);
  }
  if (cells.empty()) cells.push_back(grid.cell_of({a.x + 0.5 * dx, a.y + 0.5 * dy}));
  return cells;
}

EffortArray::EffortArray(int n_traps, std::vector<int> secondaries_per_primary)
    : n_traps_(n_traps), layout_(std::move(secondaries_per_primary)) {
  offsets_.resize(layout_.size());
  int s = 0;
  for (std::size_t k = 0; k < layout_.size(); ++k) {
    offsets_[k] = s;
    s += layout_[k];
  }
  total_ = s;
  counts_.assign(static_cast<std::size_t>(n_traps_) * total_, 0);
}

int EffortArray::trap_total(int j) const {
  int t = 0;
  for (int s = 0; s < total_; ++s) t += at(j, s);
  return t;
}

CaptureHistories::CaptureHistories(std::vector<int> secondaries_per_primary) : layout_(std::move(secondaries_per_primary)) {
  offsets_.resize(layout_.size());
  int s = 0;
  for (std::size_t k = 0; k < layout_.size(); ++k) {
    offsets_[k] = s;
    s += layout_[k];
  }
  total_ = s;
}

int CaptureHistories::add_individual(std::string id) {
  ids_.push_back(std::move(id));
  omega_.resize(omega_.size() + static_cast<std::size_t>(total_), kNone);
  return n_individuals() - 1;
}

int CaptureHistories::detections() const {
  return static_cast<int>(std::count_if(omega_.begin(), omega_.end(), [](int v) { return v != kNone; }));
}

TrapArray rasterize_effort(std::span<const TrackPoint> tracks, const RobustDesign& design, const GridSpec& grid,
                           RasterizeReport* report) {
  if (!(grid.cell_size > 0.0)) throw ValidationError("grid cell size must be positive");

  std::map<std::string, int> survey_secondary;
  for (int k = 0; k < design.n_primaries(); ++k)
    for (int l = 0; l < design.n_secondaries(k); ++l)
      for (const auto& id : design.primaries[k].secondaries[l].surveys)
        survey_secondary[id] = design.flat_secondary(k, l);

  std::map<std::string, std::vector<const TrackPoint*>> by_survey;
  for (const auto& p : tracks) by_survey[p.survey_id].push_back(&p);

  struct Job {
    std::string id;
    int secondary;
    std::vector<const TrackPoint*> points;
  };
  std::vector<Job> jobs;
  RasterizeReport local;
  for (auto& [id, pts] : by_survey) {
    auto it = survey_secondary.find(id);
    if (it == survey_secondary.end()) {
      local.ungrouped_surveys.push_back(id);
      spdlog::warn("survey '{}' is not assigned to any occasion; skipped", id);
      continue;
    }
    if (pts.size() < 2) {
      local.skipped_surveys.push_back(id);
      spdlog::warn("survey '{}' has fewer than two track points; skipped", id);
      continue;
    }
    std::stable_sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->time < b->time; });
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i]->time == pts[i - 1]->time) {
        throw ValidationError(fmt::format("survey '{}' has two track points at {}", id,
                                          format_timestamp(pts[i]->time)));
      }
    }
    jobs.push_back({id, it->second, std::move(pts)});
  }

  std::vector<std::set<Cell>> visited(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t s) {
    const auto& pts = jobs[s].points;
    for (std::size_t i = 1; i < pts.size(); ++i)
      for (const Cell& c : traverse_segment(grid, pts[i - 1]->location, pts[i]->location)) visited[s].insert(c);
  });

  std::map<Cell, std::map<int, int>> counts;
  for (std::size_t s = 0; s < jobs.size(); ++s)
    for (const Cell& c : visited[s]) counts[c][jobs[s].secondary] += 1;

  TrapArray out;
  out.grid = grid;
  for (const auto& [cell, _] : counts) {
    out.cells.push_back(cell);
    out.traps.push_back(grid.center(cell));
  }
  out.effort = EffortArray(out.size(), design.layout());
  std::vector<std::pair<int, int>> flat_to_kl;
  for (int k = 0; k < design.n_primaries(); ++k)
    for (int l = 0; l < design.n_secondaries(k); ++l) flat_to_kl.emplace_back(k, l);
  int j = 0;
  for (const auto& [cell, per_secondary] : counts) {
    for (const auto& [s, n] : per_secondary) out.effort(j, flat_to_kl[s].first, flat_to_kl[s].second) = n;
    ++j;
  }
  if (report) *report = std::move(local);
  return out;
}

int nearest_trap(std::span<const Point> traps, const Point& p, bool* tied) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  bool tie = false;
  for (std::size_t j = 0; j < traps.size(); ++j) {
    const double d = squared_distance(traps[j], p);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
      tie = false;
    } else if (d == best_d) {
      tie = true;
    }
  }
  if (tied) *tied = tie;
  return best;
}

CaptureHistories build_histories(std::span<const Sighting> sightings, const TrapArray& traps,
                                 const RobustDesign& design, HistoriesReport* report) {
  struct Span {
    Timestamp start, end;
    int secondary;
  };
  std::vector<Span> spans;
  std::vector<std::pair<int, int>> flat_to_kl;
  for (int k = 0; k < design.n_primaries(); ++k) {
    for (int l = 0; l < design.n_secondaries(k); ++l) {
      flat_to_kl.emplace_back(k, l);
      for (const auto& sp : design.primaries[k].secondaries[l].spans)
        spans.push_back({sp.start, sp.end, design.flat_secondary(k, l)});
    }
  }

  HistoriesReport rep;
  // (individual, secondary) -> earliest sighting
  std::map<std::pair<std::string, int>, const Sighting*> first;
  for (const auto& s : sightings) {
    int found = -1;
    int n_found = 0;
    for (const auto& sp : spans) {
      if (s.time >= sp.start && s.time <= sp.end) {
        if (found != sp.secondary) ++n_found;
        found = sp.secondary;
      }
    }
    if (n_found == 0) {
      ++rep.off_effort;
      continue;
    }
    if (n_found > 1) {
      ++rep.ambiguous;
      continue;
    }
    auto key = std::pair{s.individual_id, found};
    auto [it, inserted] = first.try_emplace(key, &s);
    if (!inserted) {
      const Sighting* cur = it->second;
      if (std::tie(s.time, s.location.x, s.location.y) < std::tie(cur->time, cur->location.x, cur->location.y))
        it->second = &s;
    }
  }

  std::map<std::string, std::vector<std::pair<int, int>>> records;  // id -> (secondary, trap)
  for (const auto& [key, s] : first) {
    bool tied = false;
    const int j = nearest_trap(traps.traps, s->location, &tied);
    if (j < 0) {
      ++rep.zero_effort;
      continue;
    }
    if (tied) {
      ++rep.nearest_trap_ties;
      spdlog::info("sighting of '{}' is equidistant to several traps; assigned to trap {}", key.first, j);
    }
    const auto [k, l] = flat_to_kl[key.second];
    if (traps.effort(j, k, l) <= 0) {
      ++rep.zero_effort;
      spdlog::warn("sighting of '{}' in primary {} secondary {} falls in trap {} with no effort; rejected",
                   key.first, k + 1, l + 1, j);
      continue;
    }
    records[key.first].emplace_back(key.second, j);
  }

  CaptureHistories h(design.layout());
  for (const auto& [id, recs] : records) {
    const int i = h.add_individual(id);
    for (const auto& [s, j] : recs) {
      const auto [k, l] = flat_to_kl[s];
      h(i, k, l) = j;
      ++rep.retained;
    }
  }
  if (rep.off_effort) spdlog::warn("{} off-effort sightings discarded", rep.off_effort);
  if (rep.ambiguous) spdlog::warn("{} sightings matched several secondary occasions and were discarded", rep.ambiguous);
  if (report) *report = rep;
  return h;
}

std::vector<Sighting> read_sightings(const std::string& path) {
  const auto t = csv::Table::read(path);
  const auto ci = t.column("individual_id"), ct = t.column("timestamp"), cx = t.column("x"), cy = t.column("y");
  std::vector<Sighting> out;
  out.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Sighting s;
    s.individual_id = t.cell(r, ci);
    if (s.individual_id.empty()) t.fail(r, "empty individual_id");
    try {
      s.time = parse_timestamp(t.cell(r, ct));
    } catch (const ValidationError& e) {
      t.fail(r, e.what());
    }
    s.location = {t.number(r, cx), t.number(r, cy)};
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrackPoint> read_tracks(const std::string& path) {
  const auto t = csv::Table::read(path);
  const auto ci = t.column("survey_id"), ct = t.column("timestamp"), cx = t.column("x"), cy = t.column("y");
  std::vector<TrackPoint> out;
  out.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    TrackPoint p;
    p.survey_id = t.cell(r, ci);
    if (p.survey_id.empty()) t.fail(r, "empty survey_id");
    try {
      p.time = parse_timestamp(t.cell(r, ct));
    } catch (const ValidationError& e) {
      t.fail(r, e.what());
    }
    p.location = {t.number(r, cx), t.number(r, cy)};
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<OccasionAssignment> read_occasions(const std::string& path) {
  const auto t = csv::Table::read(path);
  const auto ci = t.column("survey_id"), cp = t.column("primary"), cs = t.column("secondary");
  std::vector<OccasionAssignment> out;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    OccasionAssignment a;
    a.survey_id = t.cell(r, ci);
    a.primary = static_cast<int>(t.integer(r, cp));
    a.secondary = static_cast<int>(t.integer(r, cs));
    if (a.primary < 1 || a.secondary < 1) t.fail(r, "primary and secondary must be >= 1");
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace openscr
