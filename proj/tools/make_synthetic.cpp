// Writes a small synthetic survey (tracks, sightings, occasions, regions,
// salinity raster and a run config) simulated from the open-population
// model, for smoke tests and the determinism check.
//
//   openscr_make_synthetic data/synthetic [--seed 20240611]

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "openscr/csv.hpp"
#include "openscr/likelihood.hpp"
#include "openscr/mesh.hpp"
#include "openscr/survey.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace openscr;

namespace {

struct Truth {
  double lambda = 0.04;   // per survey through a cell at distance 0
  double sigma = 1200.0;  // meters
  double gamma = 0.35;
  double phi = 0.85;
  double log_D = std::log(3.0);  // marked animals per km^2 at mean salinity
  double salinity_slope = -0.5;  // per 5 ppt
};

json feature(const std::string& name, double x0, double y0, double x1, double y1) {
  return {{"type", "Feature"},
          {"properties", {{"name", name}}},
          {"geometry",
           {{"type", "Polygon"}, {"coordinates", {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}}}}}};
}

void write_regions(const fs::path& path, const std::vector<json>& features) {
  std::ofstream(path) << json{{"type", "FeatureCollection"}, {"features", features}}.dump(2) << '\n';
}

double salinity_at(double x, double y) { return 6.0 + 14.0 * (1.0 - y / 9000.0) + 2.0 * std::sin(x / 3000.0); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic capture-recapture survey generator"};
  std::string out_dir;
  std::uint64_t seed = 20240611;
  app.add_option("output", out_dir, "directory to write")->required();
  app.add_option("--seed", seed, "random seed");
  CLI11_PARSE(app, argc, argv);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Truth truth;

  // Study area: 12 x 9 km with an island on the northern shore.
  write_regions(dir / "boundary.geojson", {feature("study_area", 0, 0, 12000, 9000)});
  write_regions(dir / "land.geojson", {feature("island", 5000, 6500, 7000, 11000)});
  write_regions(dir / "strata.geojson", {feature("Bay", -5000, -5000, 6000, 15000), feature("Gulf", 6000, -5000, 18000, 15000)});
  write_regions(dir / "openness.geojson",
                {feature("Open", -5000, -5000, 18000, 4500), feature("Sheltered", -5000, 4500, 18000, 15000)});
  {
    csv::Writer w(dir / "salinity.csv", {"x", "y", "value"});
    for (double y = -1750; y <= 10750; y += 500)
      for (double x = -1750; x <= 13750; x += 500) w.add(x).add(y).add(std::round(salinity_at(x, y) * 100) / 100).end_row();
  }

  // Same mesh the pipeline will build.
  auto mesh = build_mesh(read_regions((dir / "boundary.geojson").string()), read_regions((dir / "land.geojson").string()),
                         1.0, 1.0);
  attach_salinity(mesh, read_raster((dir / "salinity.csv").string()), 1.0);
  const auto& sal = mesh.covariates.numeric("avg_salinity");
  double mean_sal = 0.0;
  for (double s : sal) mean_sal += s;
  mean_sal /= static_cast<double>(sal.size());
  std::vector<double> aD(static_cast<std::size_t>(mesh.size()));
  for (int m = 0; m < mesh.size(); ++m)
    aD[m] = mesh.cell_area_km2 * std::exp(truth.log_D + truth.salinity_slope * (sal[m] - mean_sal) / 5.0);

  // Six primaries of three secondaries; two surveys per secondary on consecutive days.
  const std::vector<std::string> starts{"2015-03-10", "2015-07-14", "2015-11-03", "2016-04-12", "2016-10-18", "2017-05-09"};
  const int K = static_cast<int>(starts.size()), L = 3;
  const GridSpec grid{{0.0, 0.0}, 1000.0};
  std::vector<TrackPoint> tracks;
  std::vector<OccasionAssignment> occasions;
  struct SurveyCells {
    std::string id;
    int primary, secondary;
    Timestamp start, end;
    std::vector<Cell> cells;
  };
  std::vector<SurveyCells> surveys;
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      for (int s = 0; s < 2; ++s) {
        const auto day = parse_timestamp(starts[k]) + std::chrono::days(7 * l + s) + std::chrono::hours(8);
        const auto id = fmt::format("S{}{}{}", k + 1, l + 1, s + 1);
        occasions.push_back({id, k + 1, l + 1});
        // Lawnmower transects below the island, 2 km apart, points every 400 m at 15 km/h.
        const double y0 = 300.0 + 1400.0 * unif(rng);
        std::vector<Point> path;
        for (int line = 0; line < 3; ++line) {
          const double y = y0 + 2000.0 * line;
          const bool east = line % 2 == 0;
          for (int i = 0; i <= 29; ++i) path.push_back({east ? 200.0 + 400.0 * i : 11800.0 - 400.0 * i, y});
        }
        SurveyCells sc{id, k, l, day, day, {}};
        std::set<Cell> cells;
        for (std::size_t i = 0; i < path.size(); ++i) {
          const auto t = day + std::chrono::seconds(static_cast<long>(i * 96));
          tracks.push_back({id, t, path[i]});
          sc.end = t;
          if (i > 0)
            for (const auto& c : traverse_segment(grid, path[i - 1], path[i])) cells.insert(c);
        }
        sc.cells.assign(cells.begin(), cells.end());
        surveys.push_back(std::move(sc));
      }
    }
  }
  std::vector<SurveyInfo> spans;
  for (const auto& s : surveys) spans.push_back({s.id, s.start, s.end});
  const auto design = build_design(spans, occasions);

  // Population: superpopulation ~ Poisson, entry ~ beta, survival phi^delta.
  const std::vector<double> gamma(design.delta.size(), truth.gamma);
  const auto beta = entry_probs(gamma, design.delta);
  double total = 0.0;
  for (double v : aD) total += v;
  const int N = std::poisson_distribution<int>(total)(rng);
  std::discrete_distribution<int> where(aD.begin(), aD.end());
  std::discrete_distribution<int> entry(beta.begin(), beta.end());

  std::vector<Sighting> sightings;
  int n_seen = 0;
  for (int n = 0; n < N; ++n) {
    const Point centre = mesh.points[where(rng)];
    const int e = entry(rng);
    int last = e;
    while (last + 1 < K && unif(rng) < std::pow(truth.phi, design.delta[last])) ++last;
    bool seen = false;
    const auto id = fmt::format("T{:04d}", n + 1);
    for (const auto& s : surveys) {
      if (s.primary < e || s.primary > last) continue;
      for (const auto& c : s.cells) {
        const Point cc = grid.center(c);
        const double hazard = truth.lambda * std::exp(-squared_distance(cc, centre) / (2 * truth.sigma * truth.sigma));
        const int count = std::poisson_distribution<int>(hazard)(rng);
        for (int h = 0; h < count; ++h) {
          const auto span = (s.end - s.start).count();
          const auto t = s.start + std::chrono::seconds(static_cast<long>(unif(rng) * static_cast<double>(span)));
          const Point at{cc.x + 800.0 * (unif(rng) - 0.5), cc.y + 800.0 * (unif(rng) - 0.5)};
          sightings.push_back({id, t, at});
          seen = true;
        }
      }
    }
    n_seen += seen;
  }
  std::stable_sort(sightings.begin(), sightings.end(), [](const auto& a, const auto& b) { return a.time < b.time; });

  {
    csv::Writer w(dir / "tracks.csv", {"survey_id", "timestamp", "x", "y"});
    for (const auto& t : tracks) w.add(t.survey_id).add(format_timestamp(t.time)).add(t.location.x).add(t.location.y).end_row();
  }
  {
    csv::Writer w(dir / "sightings.csv", {"individual_id", "timestamp", "x", "y"});
    for (const auto& s : sightings)
      w.add(s.individual_id).add(format_timestamp(s.time)).add(std::round(s.location.x)).add(std::round(s.location.y)).end_row();
  }
  {
    csv::Writer w(dir / "occasions.csv", {"survey_id", "primary", "secondary"});
    for (const auto& o : occasions) w.add(o.survey_id).add(o.primary).add(o.secondary).end_row();
  }

  const json config = {
      {"inputs",
       {{"sightings", "sightings.csv"},
        {"tracks", "tracks.csv"},
        {"occasions", "occasions.csv"},
        {"boundary", "boundary.geojson"},
        {"land", "land.geojson"},
        {"strata", "strata.geojson"},
        {"openness", "openness.geojson"},
        {"salinity", "salinity.csv"}}},
      {"grid", {{"origin", {0.0, 0.0}}, {"cell_size_m", 1000.0}}},
      {"mesh", {{"buffer_km", 1.0}, {"spacing_km", 1.0}, {"salinity_radius_km", 1.0}}},
      {"marked_proportion", 0.8},
      {"model",
       {{"base", {{"lambda", "1"}, {"sigma", "1"}, {"gamma", "1"}, {"phi", "1"}, {"D", "1"}}},
        {"stages",
         {{{"name", "detection"},
           {"items", {{{"param", "lambda"}, {"term", "stratum"}}, {{"param", "sigma"}, {"term", "openness"}}}}},
          {{"name", "dynamics"},
           {"items",
            {{{"param", "gamma"}, {"term", "s(time, 2)"}, {"min_df", 2}, {"max_df", 3}},
             {{"param", "phi"}, {"term", "s(time, 2)"}, {"min_df", 2}, {"max_df", 3}}}}},
          {{"name", "density"},
           {"items", {{{"param", "D"}, {"term", "s(avg_salinity, 2)"}, {"min_df", 2}, {"max_df", 4}}}}}}},
        {"aic_window", 2.0},
        {"max_iterations", 500}}},
      {"bootstrap", {{"n_draws", 400}, {"seed", 11}}},
      {"gof", {{"n_sims", 199}, {"seed", 12}, {"mode", "resample"}, {"group_by", "stratum"}}},
      {"iqd_threshold", 0.95},
      {"output_dir", "output"}};
  std::ofstream(dir / "config.json") << config.dump(2) << '\n';

  const json truth_j = {{"lambda", truth.lambda}, {"sigma", truth.sigma}, {"gamma", truth.gamma}, {"phi", truth.phi},
                        {"D_at_mean_salinity", std::exp(truth.log_D)}, {"salinity_slope_per_5ppt", truth.salinity_slope},
                        {"superpopulation_marked", N}, {"detected", n_seen}, {"seed", seed}};
  std::ofstream(dir / "truth.json") << truth_j.dump(2) << '\n';
  fmt::print("{}: {} mesh points, {} surveys, N = {}, {} detected, {} sightings\n", dir.string(), mesh.size(),
             surveys.size(), N, n_seen, sightings.size());
  return 0;
}
