#include <algorithm>
#include <map>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "artifacts.hpp"
#include "openscr/csv.hpp"
#include "openscr/gof.hpp"
#include "openscr/parallel.hpp"
#include "report.hpp"

namespace openscr::pipeline {
namespace {

std::vector<fs::path> present(std::initializer_list<fs::path> paths) {
  std::vector<fs::path> out;
  for (const auto& p : paths)
    if (!p.empty()) out.push_back(p);
  return out;
}

fs::path stage_dir(const RunConfig& config, std::string_view stage) {
  auto dir = config.output_dir / std::string(stage);
  fs::create_directories(dir);
  return dir;
}

std::string short_date(Timestamp t) { return format_short_date(t); }

// ---------------------------------------------------------------- ingest

void ingest(const RunConfig& config) {
  const auto dir = stage_dir(config, "ingest");
  const auto tracks = read_tracks(config.inputs.tracks.string());
  const auto grouping = read_occasions(config.inputs.occasions.string());
  const auto sightings = read_sightings(config.inputs.sightings.string());

  const auto spans = survey_spans(tracks);
  // Surveys without a grouping row are not part of the design.
  std::vector<SurveyInfo> grouped;
  for (const auto& s : spans)
    if (std::any_of(grouping.begin(), grouping.end(), [&](const auto& g) { return g.survey_id == s.id; }))
      grouped.push_back(s);
  const auto design = build_design(grouped, grouping);

  RasterizeReport rr;
  const GridSpec grid{{config.grid_origin_x, config.grid_origin_y}, config.cell_size_m};
  const auto traps = rasterize_effort(tracks, design, grid, &rr);
  HistoriesReport hr;
  const auto histories = build_histories(sightings, traps, design, &hr);
  if (histories.n_individuals() == 0) throw ValidationError("ingest: no sightings were retained");
  spdlog::info("ingest: {} primaries, {} traps, {} individuals, {} detections", design.n_primaries(), traps.size(),
               histories.n_individuals(), histories.detections());

  auto survey = survey_to_json(design, traps, histories);
  survey["report"] = {{"skipped_surveys", rr.skipped_surveys}, {"ungrouped_surveys", rr.ungrouped_surveys},
                      {"sightings", sightings.size()},        {"off_effort", hr.off_effort},
                      {"ambiguous", hr.ambiguous},            {"zero_effort", hr.zero_effort},
                      {"nearest_trap_ties", hr.nearest_trap_ties}, {"retained", hr.retained}};
  write_json(dir / "survey.json", survey);

  {
    csv::Writer w(dir / "occasions.csv", {"primary", "secondary", "survey_id", "start", "end"});
    for (int k = 0; k < design.n_primaries(); ++k)
      for (int l = 0; l < design.n_secondaries(k); ++l) {
        const auto& sec = design.primaries[k].secondaries[l];
        for (std::size_t s = 0; s < sec.surveys.size(); ++s) {
          w.add(k + 1).add(l + 1).add(sec.surveys[s]).add(format_timestamp(sec.spans[s].start));
          w.add(format_timestamp(sec.spans[s].end)).end_row();
        }
      }
  }
  {
    csv::Writer w(dir / "intervals.csv", {"interval", "from", "to", "delta_years"});
    for (int k = 0; k + 1 < design.n_primaries(); ++k) {
      w.add(k + 1).add(format_timestamp(design.primaries[k].midpoint()));
      w.add(format_timestamp(design.primaries[k + 1].midpoint())).add(design.delta[k]).end_row();
    }
  }
  {
    csv::Writer w(dir / "traps.csv", {"trap", "x", "y", "total_effort"});
    for (int j = 0; j < traps.size(); ++j)
      w.add(j + 1).add(traps.traps[j].x).add(traps.traps[j].y).add(traps.effort.trap_total(j)).end_row();
  }
  {
    csv::Writer w(dir / "effort.csv", {"trap", "primary", "secondary", "u"});
    for (int k = 0; k < traps.effort.n_primaries(); ++k)
      for (int l = 0; l < traps.effort.n_secondaries(k); ++l)
        for (int j = 0; j < traps.size(); ++j)
          if (traps.effort(j, k, l) > 0) w.add(j + 1).add(k + 1).add(l + 1).add(traps.effort(j, k, l)).end_row();
  }
  {
    csv::Writer w(dir / "histories.csv", {"individual_id", "primary", "secondary", "trap"});
    for (int i = 0; i < histories.n_individuals(); ++i)
      for (int k = 0; k < histories.n_primaries(); ++k)
        for (int l = 0; l < histories.n_secondaries(k); ++l)
          if (histories(i, k, l) != CaptureHistories::kNone)
            w.add(histories.id(i)).add(k + 1).add(l + 1).add(histories(i, k, l) + 1).end_row();
  }
  write_manifest(config, "ingest", {config.inputs.sightings, config.inputs.tracks, config.inputs.occasions},
                 {{"grid_origin", {config.grid_origin_x, config.grid_origin_y}}, {"cell_size_m", config.cell_size_m}});
}

// ---------------------------------------------------------------- mesh

void mesh(const RunConfig& config) {
  const auto survey_path = require(config, "mesh", "ingest", "survey.json", "the ingested survey");
  const auto survey = survey_from_json(read_json(survey_path));
  const auto dir = stage_dir(config, "mesh");

  const auto boundary = read_regions(config.inputs.boundary.string());
  const RegionSet land = config.inputs.land.empty() ? RegionSet{} : read_regions(config.inputs.land.string());
  auto m = build_mesh(boundary, land, config.buffer_km, config.spacing_km);

  CovariateTable trap_cov(survey.traps.size());
  std::vector<std::string> factor_names;
  for (const auto& [name, path] : {std::pair<std::string, fs::path>{"stratum", config.inputs.strata},
                                   std::pair<std::string, fs::path>{"openness", config.inputs.openness}}) {
    if (path.empty()) continue;
    const auto regions = read_regions(path.string());
    attach_regions(m, name, regions);
    trap_cov.set_factor(name, classify_points(survey.traps, regions, "trap"));
    factor_names.push_back(name);
  }
  if (!config.inputs.salinity.empty()) attach_salinity(m, read_raster(config.inputs.salinity.string()), config.salinity_radius_km);
  spdlog::info("mesh: {} points of {} km^2", m.size(), m.cell_area_km2);
  write_mesh(m, (dir / "mesh.csv").string());

  std::vector<std::string> cols{"trap"};
  cols.insert(cols.end(), factor_names.begin(), factor_names.end());
  csv::Writer w(dir / "trap_covariates.csv", cols);
  for (std::size_t j = 0; j < survey.traps.size(); ++j) {
    w.add(j + 1);
    for (const auto& n : factor_names) {
      const auto& f = trap_cov.factor(n);
      w.add(f.levels[static_cast<std::size_t>(f.codes[j])]);
    }
    w.end_row();
  }
  write_manifest(config, "mesh",
                 present({survey_path, config.inputs.boundary, config.inputs.land, config.inputs.strata,
                          config.inputs.openness, config.inputs.salinity}),
                 {{"buffer_km", config.buffer_km},
                  {"spacing_km", config.spacing_km},
                  {"salinity_radius_km", config.salinity_radius_km}});
}

std::vector<fs::path> model_inputs(const RunConfig& config) {
  return {artifact(config, "ingest", "survey.json"), artifact(config, "mesh", "mesh.csv"),
          artifact(config, "mesh", "trap_covariates.csv")};
}

FitControls fit_controls(const RunConfig& config) {
  FitControls c;
  c.optimizer.max_iterations = config.max_iterations;
  return c;
}

void write_coefficients(const fs::path& path, const FitResult& fit) {
  csv::Writer w(path, {"coefficient", "estimate", "se"});
  for (int c = 0; c < fit.n_params(); ++c) {
    w.add(fit.names[static_cast<std::size_t>(c)]).add(fit.theta(c));
    w.add(fit.has_vcov ? std::sqrt(std::max(0.0, fit.vcov(c, c))) : std::numeric_limits<double>::quiet_NaN());
    w.end_row();
  }
}

// ---------------------------------------------------------------- fit

void fit(const RunConfig& config) {
  const auto loaded = load_model_data(config, "fit");
  const auto dir = stage_dir(config, "fit");
  const auto result = maximize(config.base, loaded.data, std::nullopt, fit_controls(config));
  if (!std::isfinite(result.loglik)) throw NumericalError(fmt::format("fit: {}", result.message));
  spdlog::info("fit: {} loglik {:.4f} AIC {:.4f}{}", result.spec.describe(), result.loglik, result.aic,
               result.converged ? "" : " (not converged)");
  write_json(dir / "fit.json", fit_to_json(result));
  write_coefficients(dir / "coefficients.csv", result);
  write_manifest(config, "fit", model_inputs(config), {{"model", config.base.describe()}, {"max_iterations", config.max_iterations}});
}

// ---------------------------------------------------------------- select

json stages_to_json(const std::vector<Stage>& stages) {
  json j = json::array();
  for (const auto& s : stages) {
    json items = json::array();
    for (const auto& it : s.items)
      items.push_back({{"param", param_name(it.param)}, {"term", it.term.label()}, {"min_df", it.min_df}, {"max_df", it.max_df}});
    j.push_back({{"name", s.name}, {"items", items}});
  }
  return j;
}

void select(const RunConfig& config) {
  const auto loaded = load_model_data(config, "select");
  const auto dir = stage_dir(config, "select");
  SelectControls controls;
  controls.fit = fit_controls(config);
  controls.window = config.aic_window;
  const auto set = stepwise_select(config.base, config.stages, loaded.data, controls);

  json j;
  j["fits"] = json::array();
  for (const auto& f : set.fits) j["fits"].push_back(fit_to_json(f));
  j["weights"] = set.weights;
  j["history"] = json::array();
  for (const auto& r : set.history) j["history"].push_back(record_to_json(r));
  j["retained_df"] = set.retained_df;
  write_json(dir / "candidates.json", j);

  write_selection_table((dir / "selection_table.csv").string(), set.history);
  csv::Writer w(dir / "candidates.csv", {"rank", "model", "q", "loglik", "aic", "delta_aic", "weight"});
  for (std::size_t i = 0; i < set.fits.size(); ++i) {
    const auto& f = set.fits[i];
    w.add(i + 1).add(f.spec.describe()).add(f.n_params()).add(f.loglik).add(f.aic).add(f.aic - set.fits.front().aic);
    w.add(set.weights[i]).end_row();
  }
  for (std::size_t i = 0; i < set.fits.size(); ++i)
    write_coefficients(dir / fmt::format("coefficients_{}.csv", i + 1), set.fits[i]);
  spdlog::info("select: {} candidate(s), best {}", set.fits.size(), set.fits.front().spec.describe());
  write_manifest(config, "select", model_inputs(config),
                 {{"base", config.base.describe()}, {"stages", stages_to_json(config.stages)},
                  {"aic_window", config.aic_window}, {"max_iterations", config.max_iterations}});
}

// ---------------------------------------------------------------- boot

void boot(const RunConfig& config) {
  const auto candidates = read_candidates(config, "boot");
  const auto loaded = load_model_data(config, "boot");
  const auto dir = stage_dir(config, "boot");
  const auto& data = loaded.data;
  const auto& survey = loaded.survey;
  const double marked = config.marked_proportion;

  const auto draws = model_average_bootstrap(candidates, data, config.n_draws, config.boot_seed);
  {
    csv::Writer w(dir / "draws.csv", {"draw", "model", "coefficient", "value"});
    for (int i = 0; i < draws.size(); ++i) {
      const auto& d = draws.draws[static_cast<std::size_t>(i)];
      const auto& names = candidates.fits[static_cast<std::size_t>(d.model)].names;
      for (Eigen::Index c = 0; c < d.theta.size(); ++c)
        w.add(i).add(d.model + 1).add(names[static_cast<std::size_t>(c)]).add(csv::fmt_exact(d.theta(c))).end_row();
    }
  }

  const std::vector<double> area(static_cast<std::size_t>(loaded.mesh.size()), loaded.mesh.cell_area_km2);
  const auto region = iqd_region(draws, config.iqd_threshold);
  const auto dens = summarize_density(draws, area, marked, &region);
  const auto all = summarize_density(draws, area, marked);
  {
    csv::Writer w(dir / "density_mean.csv", {"x", "y", "mean", "lcl", "ucl", "iqd", "kept", "cv"});
    for (int m = 0; m < loaded.mesh.size(); ++m) {
      const auto& d = dens.density[static_cast<std::size_t>(m)];
      w.add(loaded.mesh.points[m].x).add(loaded.mesh.points[m].y).add(d.mean).add(d.lcl).add(d.ucl);
      w.add(region.iqd[static_cast<std::size_t>(m)]).add(region.keep[static_cast<std::size_t>(m)] ? 1 : 0);
      w.add(dens.cv[static_cast<std::size_t>(m)]).end_row();
    }
  }
  {
    csv::Writer w(dir / "abundance.csv", {"primary", "date", "region", "N", "lcl", "ucl"});
    for (int k = 0; k < survey.n_primaries(); ++k) {
      for (const auto* s : {&dens, &all}) {
        const auto& a = s->abundance[static_cast<std::size_t>(k)];
        w.add(k + 1).add(short_date(survey.midpoint(k))).add(s == &dens ? "kept" : "all").add(a.mean).add(a.lcl).add(a.ucl);
        w.end_row();
      }
    }
  }
  if (loaded.mesh.covariates.has("avg_salinity")) {
    const auto bands = salinity_bands(draws, loaded.mesh.covariates.numeric("avg_salinity"), area, marked, &region);
    csv::Writer w(dir / "salinity_bands.csv", {"primary", "band", "area", "n_points", "density", "density_lcl",
                                               "density_ucl", "abundance", "abundance_lcl", "abundance_ucl"});
    for (int k = 0; k < survey.n_primaries(); ++k)
      for (const auto& b : bands) {
        const auto& d = b.density[static_cast<std::size_t>(k)];
        const auto& n = b.abundance[static_cast<std::size_t>(k)];
        w.add(k + 1).add(b.band).add(b.area).add(b.n_points).add(d.mean).add(d.lcl).add(d.ucl);
        w.add(n.mean).add(n.lcl).add(n.ucl).end_row();
      }
  }
  const auto dyn = summarize_dynamics(draws, survey.delta, marked);
  {
    // Each interval's survival is dated at the mid-point of the primary that opens it.
    csv::Writer w(dir / "survival.csv", {"interval", "date", "phi", "lcl", "ucl"});
    for (std::size_t k = 0; k < dyn.phi.size(); ++k) {
      w.add(fmt::format("{}--{}", k + 1, k + 2)).add(short_date(survey.midpoint(static_cast<int>(k))));
      w.add(dyn.phi[k].mean).add(dyn.phi[k].lcl).add(dyn.phi[k].ucl).end_row();
    }
  }
  {
    csv::Writer w(dir / "recruitment.csv",
                  {"interval", "from", "to", "recruits_per_year", "lcl", "ucl", "gamma", "gamma_lcl", "gamma_ucl"});
    for (std::size_t k = 0; k < dyn.recruits_per_year.size(); ++k) {
      const auto& r = dyn.recruits_per_year[k];
      const auto& g = dyn.gamma[k];
      w.add(fmt::format("{}--{}", k + 1, k + 2)).add(short_date(survey.midpoint(static_cast<int>(k))));
      w.add(short_date(survey.midpoint(static_cast<int>(k) + 1))).add(r.mean).add(r.lcl).add(r.ucl);
      w.add(g.mean).add(g.lcl).add(g.ucl).end_row();
    }
  }
  {
    const auto det = summarize_detection(draws);
    csv::Writer w(dir / "detection.csv", {"primary", "lambda", "lambda_lcl", "lambda_ucl", "sigma", "sigma_lcl", "sigma_ucl"});
    for (std::size_t k = 0; k < det.lambda.size(); ++k) {
      w.add(k + 1).add(det.lambda[k].mean).add(det.lambda[k].lcl).add(det.lambda[k].ucl);
      w.add(det.sigma[k].mean).add(det.sigma[k].lcl).add(det.sigma[k].ucl).end_row();
    }
  }
  {
    csv::Writer w(dir / "model_counts.csv", {"model", "description", "weight", "draws"});
    for (std::size_t m = 0; m < candidates.fits.size(); ++m)
      w.add(m + 1).add(candidates.fits[m].spec.describe()).add(candidates.weights[m]).add(draws.model_counts[m]).end_row();
  }
  auto inputs = model_inputs(config);
  inputs.push_back(artifact(config, "select", "candidates.json"));
  write_manifest(config, "boot", inputs,
                 {{"n_draws", config.n_draws},
                  {"seed", config.boot_seed},
                  {"marked_proportion", config.marked_proportion},
                  {"iqd_threshold", config.iqd_threshold},
                  {"kept_mesh_points", region.kept()},
                  {"recruits_per_year", "beta[k+1] * superpopulation / delta[k] / marked_proportion"},
                  {"density_scale", "whole population (marked / marked_proportion)"}});
  spdlog::info("boot: {} draws, region keeps {} of {} mesh points", draws.size(), region.kept(), loaded.mesh.size());
}

// ---------------------------------------------------------------- gof

void write_components(const fs::path& path, const char* key, const GofTest& t) {
  csv::Writer w(path, {key, "observed", "mean", "lower", "upper", "p_value"});
  for (const auto& c : t.components) {
    double mean = 0.0;
    for (double v : c.simulated) mean += v;
    mean /= static_cast<double>(std::max<std::size_t>(1, c.simulated.size()));
    w.add(c.label).add(c.observed).add(mean).add(c.lower).add(c.upper).add(c.p_value).end_row();
  }
}

void gof(const RunConfig& config) {
  const auto candidates = read_candidates(config, "gof");
  const auto loaded = load_model_data(config, "gof");
  const auto dir = stage_dir(config, "gof");

  GofOptions options;
  options.n_sims = config.gof_sims;
  options.seed = config.gof_seed;
  if (!config.gof_group_by.empty()) {
    if (!loaded.trap_covariates.has(config.gof_group_by))
      throw ValidationError(fmt::format("gof.group_by: no trap covariate '{}'", config.gof_group_by));
    const auto& f = loaded.trap_covariates.factor(config.gof_group_by);
    options.trap_groups = f.codes;
    options.group_names = f.levels;
  }
  GofReport report;
  std::vector<fs::path> inputs = model_inputs(config);
  inputs.push_back(artifact(config, "select", "candidates.json"));
  if (config.gof_fixed) {
    const auto& best = candidates.fits.front();
    report = run_gof(expand_params(best.theta, ParamMap::build(best.spec, loaded.data.frames)), loaded.data,
                     loaded.survey.histories, options);
  } else {
    const auto draws = read_draws(config, "gof");
    inputs.push_back(artifact(config, "boot", "draws.csv"));
    report = run_gof(candidates, draws, loaded.data, loaded.survey.histories, options);
  }

  json j;
  j["n_sims"] = report.n_sims;
  j["seed"] = report.seed;
  j["mode"] = report.fixed_parameters ? "fixed" : "resample";
  j["tests"] = json::array();
  for (const auto& t : report.tests) {
    json comps = json::array();
    for (const auto& c : t.components)
      comps.push_back({{"label", c.label}, {"observed", c.observed}, {"lower", c.lower}, {"upper", c.upper}, {"p_value", c.p_value}});
    j["tests"].push_back({{"name", t.name},
                          {"observed_discrepancy", t.observed_discrepancy},
                          {"p_value", t.p_value},
                          {"inside_envelope", t.inside_envelope},
                          {"components", comps}});
  }
  write_json(dir / "gof.json", j);

  {
    csv::Writer w(dir / "gof_summary.csv", {"test", "observed", "p_value", "inside_envelope"});
    for (const auto& t : report.tests)
      w.add(t.name).add(t.observed_discrepancy).add(t.p_value).add(t.inside_envelope ? "true" : "false").end_row();
  }
  write_components(dir / "gof_first_seen.csv", "primary", report.tests[0]);
  {
    const auto& t = report.tests[1];
    csv::Writer w(dir / "gof_t_between.csv", {"sim", "t_between"});
    const auto& sims = t.components.front().simulated;
    for (std::size_t i = 0; i < sims.size(); ++i) w.add(i + 1).add(sims[i]).end_row();
  }
  write_components(dir / "gof_trap_counts.csv", options.trap_groups.empty() ? "trap" : "group", report.tests[2]);
  write_manifest(config, "gof", inputs,
                 {{"n_sims", config.gof_sims}, {"seed", config.gof_seed}, {"mode", config.gof_fixed ? "fixed" : "resample"},
                  {"group_by", config.gof_group_by}});
  for (const auto& t : report.tests)
    spdlog::info("gof: {} p = {:.3f}{}", t.name, t.p_value, t.inside_envelope ? "" : " (outside envelope)");
}

}  // namespace

void run(const RunConfig& config_in, const RunOptions& options) {
  RunConfig config = config_in;
  if (options.seed_override) {
    config.boot_seed = *options.seed_override;
    config.gof_seed = *options.seed_override + 1;
  }
  validate(config);
  const unsigned previous = thread_count();
  set_thread_count(std::max(1u, options.threads));
  struct Restore {
    unsigned n;
    ~Restore() { set_thread_count(n); }
  } restore{previous};

  const std::map<std::string, void (*)(const RunConfig&), std::less<>> table{
      {"ingest", ingest}, {"mesh", mesh}, {"fit", fit}, {"select", select},
      {"boot", boot},     {"gof", gof},   {"report", write_report}};
  if (options.stage == "all") {
    for (auto s : kStages) {
      spdlog::info("stage {}", s);
      table.find(s)->second(config);
    }
    return;
  }
  const auto it = table.find(options.stage);
  if (it == table.end()) {
    throw ValidationError(fmt::format("unknown stage '{}' (expected one of {}, all)", options.stage, fmt::join(kStages, ", ")));
  }
  it->second(config);
}

}  // namespace openscr::pipeline
