#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "artifacts.hpp"
#include "openscr/csv.hpp"

namespace openscr::pipeline {
namespace {

std::string fixed(double v, int decimals) { return fmt::format("{:.{}f}", v, decimals); }

/// df of the smooth in time on `p`; 1 otherwise.
int time_df(const ModelSpec& spec, Param p) {
  for (const auto& t : spec[p].terms)
    if (t.is_smooth() && t.variables == std::vector<std::string>{"time"}) return t.df;
  return 1;
}

bool varies_in_time(const ModelSpec& spec) {
  for (Param p : {Param::gamma, Param::phi})
    for (const auto& t : spec[p].terms)
      if (t.is_smooth()) return true;
  return false;
}

void selection_table(const RunConfig& config, const fs::path& out) {
  const auto cands = read_candidates(config, "report");
  // The stage that searched the dynamics df: prefer one named "dynamics".
  std::string stage;
  for (const auto& r : cands.history)
    if (r.stage == "dynamics") stage = r.stage;
  if (stage.empty())
    for (const auto& r : cands.history)
      if (r.converged && varies_in_time(r.spec)) {
        stage = r.stage;
        break;
      }
  std::map<std::pair<int, int>, double> best;
  for (const auto& r : cands.history) {
    if (r.stage != stage || !r.converged) continue;
    const auto key = std::make_pair(time_df(r.spec, Param::gamma), time_df(r.spec, Param::phi));
    auto [it, inserted] = best.try_emplace(key, r.aic);
    if (!inserted) it->second = std::min(it->second, r.aic);
  }
  std::vector<std::pair<double, std::pair<int, int>>> rows;
  for (const auto& [key, a] : best) rows.emplace_back(a, key);
  std::sort(rows.begin(), rows.end());
  if (rows.size() > 10) rows.resize(10);

  csv::Writer w(out, {"Recruitment df", "Survival df", "Delta AIC"});
  for (const auto& [a, key] : rows) w.add(key.first).add(key.second).add(fixed(a - rows.front().first, 1)).end_row();
}

void copy_artifact(const fs::path& from, const fs::path& to) { fs::copy_file(from, to, fs::copy_options::overwrite_existing); }

}  // namespace

void write_report(const RunConfig& config) {
  constexpr std::string_view kStage = "report";
  const auto survey_path = require(config, kStage, "ingest", "survey.json", "the ingested survey");
  const auto survival_path = require(config, kStage, "boot", "survival.csv", "bootstrap survival summaries");
  const auto abundance_path = require(config, kStage, "boot", "abundance.csv", "bootstrap abundance summaries");
  require(config, kStage, "select", "candidates.json", "the candidate set");
  const auto gof_path = require(config, kStage, "gof", "gof_summary.csv", "goodness-of-fit results");
  const auto survey = survey_from_json(read_json(survey_path));
  const auto dir = config.output_dir / std::string(kStage);
  fs::create_directories(dir);

  {
    csv::Writer w(dir / "table_occasions.csv", {"Primary", "Start Date"});
    for (int k = 0; k < survey.n_primaries(); ++k) w.add(k + 1).add(format_short_date(survey.first[k])).end_row();
  }
  {
    csv::Writer w(dir / "table_intervals.csv", {"Interval", "Duration"});
    for (std::size_t k = 0; k < survey.delta.size(); ++k)
      w.add(fmt::format("{}--{}", k + 1, k + 2)).add(fixed(survey.delta[k], 1)).end_row();
  }
  selection_table(config, dir / "table_selection.csv");
  {
    const auto t = csv::Table::read(survival_path);
    const auto cd = t.column("date"), cp = t.column("phi"), cl = t.column("lcl"), cu = t.column("ucl");
    csv::Writer w(dir / "table_survival.csv", {"Date", "phi", "LCL", "UCL"});
    for (std::size_t r = 0; r < t.rows(); ++r) {
      w.add(t.cell(r, cd)).add(fixed(t.number(r, cp), 2)).add(fixed(t.number(r, cl), 2)).add(fixed(t.number(r, cu), 2));
      w.end_row();
    }
  }
  const auto bands_path = artifact(config, "boot", "salinity_bands.csv");
  if (fs::exists(bands_path)) {
    // Bands for the final primary occasion.
    const auto t = csv::Table::read(bands_path);
    const long last = survey.n_primaries();
    csv::Writer w(dir / "table_salinity_bands.csv", {"Salinity", "Area", "Density", "Density LCL", "Density UCL",
                                                     "Abundance", "Abundance LCL", "Abundance UCL"});
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (t.integer(r, t.column("primary")) != last) continue;
      w.add(t.cell(r, t.column("band"))).add(fixed(t.number(r, t.column("area")), 1));
      for (const char* c : {"density", "density_lcl", "density_ucl"}) w.add(fixed(t.number(r, t.column(c)), 2));
      for (const char* c : {"abundance", "abundance_lcl", "abundance_ucl"}) w.add(fixed(t.number(r, t.column(c)), 0));
      w.end_row();
    }
  }

  {
    // Surveyed traps and first detections per primary.
    csv::Writer w(dir / "plot_effort.csv", {"primary", "surveyed_traps", "first_seen"});
    std::vector<int> first(static_cast<std::size_t>(survey.n_primaries()), 0);
    for (int i = 0; i < survey.histories.n_individuals(); ++i) {
      for (int k = 0; k < survey.n_primaries(); ++k) {
        bool seen = false;
        for (int l = 0; l < survey.histories.n_secondaries(k); ++l) seen = seen || survey.histories(i, k, l) != CaptureHistories::kNone;
        if (seen) {
          ++first[static_cast<std::size_t>(k)];
          break;
        }
      }
    }
    for (int k = 0; k < survey.n_primaries(); ++k) {
      int surveyed = 0;
      for (std::size_t j = 0; j < survey.traps.size(); ++j) {
        int u = 0;
        for (int l = 0; l < survey.effort.n_secondaries(k); ++l) u += survey.effort(static_cast<int>(j), k, l);
        surveyed += u > 0;
      }
      w.add(k + 1).add(surveyed).add(first[static_cast<std::size_t>(k)]).end_row();
    }
  }
  copy_artifact(survival_path, dir / "plot_survival.csv");
  copy_artifact(artifact(config, "boot", "recruitment.csv"), dir / "plot_recruitment.csv");
  copy_artifact(artifact(config, "boot", "density_mean.csv"), dir / "plot_density.csv");
  copy_artifact(abundance_path, dir / "plot_abundance.csv");
  copy_artifact(artifact(config, "boot", "detection.csv"), dir / "plot_detection.csv");
  copy_artifact(gof_path, dir / "plot_gof_summary.csv");
  for (const char* f : {"gof_first_seen.csv", "gof_t_between.csv", "gof_trap_counts.csv"})
    copy_artifact(artifact(config, "gof", f), dir / fmt::format("plot_{}", f));

  write_manifest(config, kStage,
                 {survey_path, artifact(config, "select", "candidates.json"), survival_path, abundance_path, gof_path},
                 json::object());
}

}  // namespace openscr::pipeline
