#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "openscr/pipeline.hpp"

namespace openscr::pipeline {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const fs::path& file, const std::string& what) {
  throw ValidationError(fmt::format("{}: {}", file.string(), what));
}

/// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where, const fs::path& file) {
  if (!obj.is_object()) bad(file, fmt::format("'{}' must be an object", where));
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) bad(file, fmt::format("unknown key '{}{}'", where.empty() ? "" : where + ".", key));
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where, const fs::path& file) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad(file, fmt::format("'{}{}' has the wrong type", where.empty() ? "" : where + ".", key));
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

Stage parse_stage(const json& j, std::size_t index, const fs::path& file) {
  const auto where = fmt::format("model.stages[{}]", index);
  check_keys(j, {"name", "items"}, where, file);
  Stage stage;
  read(j, "name", stage.name, where, file);
  if (stage.name.empty()) bad(file, fmt::format("'{}.name' is required", where));
  if (!j.contains("items") || !j["items"].is_array()) bad(file, fmt::format("'{}.items' must be an array", where));
  for (std::size_t i = 0; i < j["items"].size(); ++i) {
    const auto& it = j["items"][i];
    const auto w = fmt::format("{}.items[{}]", where, i);
    check_keys(it, {"param", "term", "min_df", "max_df"}, w, file);
    std::string param, term;
    MenuItem item;
    read(it, "param", param, w, file);
    read(it, "term", term, w, file);
    read(it, "min_df", item.min_df, w, file);
    read(it, "max_df", item.max_df, w, file);
    try {
      item.param = param_from_name(param);
      const auto f = Formula::parse(term);
      if (f.terms.size() != 1) bad(file, fmt::format("'{}.term' must be a single term", w));
      item.term = f.terms.front();
    } catch (const ValidationError& e) {
      bad(file, fmt::format("{}: {}", w, e.what()));
    }
    if (item.term.is_smooth()) {
      if (item.term.df == 0) item.term.df = item.min_df;
      if (item.min_df < 1 || item.max_df < item.min_df || item.term.df < item.min_df || item.term.df > item.max_df) {
        bad(file, fmt::format("'{}' needs 1 <= min_df <= df <= max_df", w));
      }
    }
    stage.items.push_back(std::move(item));
  }
  return stage;
}

}  // namespace

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config '{}'", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    bad(path, fmt::format("invalid JSON ({})", e.what()));
  }
  check_keys(j, {"inputs", "grid", "mesh", "marked_proportion", "model", "bootstrap", "gof", "iqd_threshold",
                 "output_dir"},
             "", path);

  RunConfig c;
  c.source = fs::absolute(path);
  const auto base = c.source.parent_path();

  if (!j.contains("inputs")) bad(path, "'inputs' is required");
  const auto& in_j = j["inputs"];
  check_keys(in_j, {"sightings", "tracks", "occasions", "boundary", "land", "strata", "openness", "salinity"}, "inputs",
             path);
  auto input = [&](const char* key, fs::path& out) {
    std::string s;
    read(in_j, key, s, "inputs", path);
    out = resolve(base, s);
  };
  input("sightings", c.inputs.sightings);
  input("tracks", c.inputs.tracks);
  input("occasions", c.inputs.occasions);
  input("boundary", c.inputs.boundary);
  input("land", c.inputs.land);
  input("strata", c.inputs.strata);
  input("openness", c.inputs.openness);
  input("salinity", c.inputs.salinity);

  if (j.contains("grid")) {
    const auto& g = j["grid"];
    check_keys(g, {"origin", "cell_size_m"}, "grid", path);
    std::vector<double> origin{0.0, 0.0};
    read(g, "origin", origin, "grid", path);
    if (origin.size() != 2) bad(path, "'grid.origin' must be [x, y]");
    c.grid_origin_x = origin[0];
    c.grid_origin_y = origin[1];
    read(g, "cell_size_m", c.cell_size_m, "grid", path);
  }
  if (j.contains("mesh")) {
    const auto& m = j["mesh"];
    check_keys(m, {"buffer_km", "spacing_km", "salinity_radius_km"}, "mesh", path);
    read(m, "buffer_km", c.buffer_km, "mesh", path);
    read(m, "spacing_km", c.spacing_km, "mesh", path);
    read(m, "salinity_radius_km", c.salinity_radius_km, "mesh", path);
  }
  read(j, "marked_proportion", c.marked_proportion, "", path);
  read(j, "iqd_threshold", c.iqd_threshold, "", path);

  c.stages = default_stages();
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, {"base", "stages", "aic_window", "max_iterations"}, "model", path);
    if (m.contains("base")) {
      check_keys(m["base"], {"lambda", "sigma", "gamma", "phi", "D"}, "model.base", path);
      for (const auto& [name, value] : m["base"].items()) {
        if (!value.is_string()) bad(path, fmt::format("'model.base.{}' must be a formula string", name));
        try {
          c.base[param_from_name(name)] = Formula::parse(value.get<std::string>());
        } catch (const ValidationError& e) {
          bad(path, fmt::format("model.base.{}: {}", name, e.what()));
        }
      }
    }
    if (m.contains("stages") && !(m["stages"].is_string() && m["stages"] == "default")) {
      if (!m["stages"].is_array()) bad(path, "'model.stages' must be \"default\" or an array");
      c.stages.clear();
      for (std::size_t i = 0; i < m["stages"].size(); ++i) c.stages.push_back(parse_stage(m["stages"][i], i, path));
    }
    read(m, "aic_window", c.aic_window, "model", path);
    read(m, "max_iterations", c.max_iterations, "model", path);
  }
  if (j.contains("bootstrap")) {
    const auto& b = j["bootstrap"];
    check_keys(b, {"n_draws", "seed"}, "bootstrap", path);
    read(b, "n_draws", c.n_draws, "bootstrap", path);
    read(b, "seed", c.boot_seed, "bootstrap", path);
  }
  if (j.contains("gof")) {
    const auto& g = j["gof"];
    check_keys(g, {"n_sims", "seed", "mode", "group_by"}, "gof", path);
    read(g, "n_sims", c.gof_sims, "gof", path);
    read(g, "seed", c.gof_seed, "gof", path);
    std::string mode = "resample";
    read(g, "mode", mode, "gof", path);
    if (mode != "resample" && mode != "fixed") bad(path, "'gof.mode' must be \"resample\" or \"fixed\"");
    c.gof_fixed = mode == "fixed";
    read(g, "group_by", c.gof_group_by, "gof", path);
  }
  std::string out = "output";
  read(j, "output_dir", out, "", path);
  c.output_dir = resolve(base, out);
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  auto need = [](const fs::path& p, const char* key, bool required) {
    if (p.empty()) {
      if (required) throw ValidationError(fmt::format("config: 'inputs.{}' is required", key));
      return;
    }
    if (!fs::exists(p)) throw ValidationError(fmt::format("config: 'inputs.{}' does not exist: {}", key, p.string()));
  };
  need(c.inputs.sightings, "sightings", true);
  need(c.inputs.tracks, "tracks", true);
  need(c.inputs.occasions, "occasions", true);
  need(c.inputs.boundary, "boundary", true);
  need(c.inputs.land, "land", false);
  need(c.inputs.strata, "strata", false);
  need(c.inputs.openness, "openness", false);
  need(c.inputs.salinity, "salinity", false);

  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(fmt::format("config: '{}' must be positive", key));
  };
  positive(c.cell_size_m, "grid.cell_size_m");
  positive(c.spacing_km, "mesh.spacing_km");
  positive(c.salinity_radius_km, "mesh.salinity_radius_km");
  positive(c.iqd_threshold, "iqd_threshold");
  positive(c.aic_window, "model.aic_window");
  if (!(c.buffer_km >= 0.0)) throw ValidationError("config: 'mesh.buffer_km' must be nonnegative");
  if (!(c.marked_proportion > 0.0 && c.marked_proportion <= 1.0)) {
    throw ValidationError("config: 'marked_proportion' must lie in (0, 1]");
  }
  if (c.max_iterations < 1) throw ValidationError("config: 'model.max_iterations' must be at least 1");
  if (c.n_draws < 4) throw ValidationError("config: 'bootstrap.n_draws' must be at least 4");
  if (c.gof_sims < 100) throw ValidationError("config: 'gof.n_sims' must be at least 100");
  if (c.output_dir.empty()) throw ValidationError("config: 'output_dir' is required");
}

MissingArtifact::MissingArtifact(const std::string& stage, const std::string& what)
    : ValidationError(fmt::format("stage '{}' needs {}; run the upstream stage first", stage, what)) {}

}  // namespace openscr::pipeline
