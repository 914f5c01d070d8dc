#include "artifacts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "openscr/csv.hpp"

#ifndef OPENSCR_VERSION
#define OPENSCR_VERSION "unknown"
#endif

namespace openscr::pipeline {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// JSON has no infinities; failed fits carry null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or(const json& j, double fallback) { return j.is_null() ? fallback : j.get<double>(); }

json timestamp(Timestamp t) { return format_timestamp(t); }

}  // namespace

fs::path artifact(const RunConfig& config, std::string_view stage, std::string_view file) {
  return config.output_dir / std::string(stage) / std::string(file);
}

fs::path require(const RunConfig& config, std::string_view stage, std::string_view upstream, std::string_view file,
                 std::string_view what) {
  auto p = artifact(config, upstream, file);
  if (!fs::exists(p)) {
    throw MissingArtifact(std::string(stage), fmt::format("{} ({}/{} from stage '{}')", what, upstream, file, upstream));
  }
  return p;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: invalid JSON ({})", path.string(), e.what()));
  }
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
}

std::vector<double> Survey::midpoint_years() const {
  std::vector<double> out;
  for (int k = 0; k < n_primaries(); ++k) out.push_back(years_between(midpoint(0), midpoint(k)));
  return out;
}

json survey_to_json(const RobustDesign& design, const TrapArray& traps, const CaptureHistories& histories) {
  json j;
  j["primaries"] = json::array();
  for (const auto& p : design.primaries) {
    json pj{{"first", timestamp(p.first)}, {"last", timestamp(p.last)}, {"secondaries", json::array()}};
    for (const auto& s : p.secondaries) pj["secondaries"].push_back({{"surveys", s.surveys}});
    j["primaries"].push_back(pj);
  }
  j["delta"] = design.delta;
  j["grid"] = {{"origin", {traps.grid.origin.x, traps.grid.origin.y}}, {"cell_size_m", traps.grid.cell_size}};
  j["traps"] = json::array();
  for (int t = 0; t < traps.size(); ++t) {
    j["traps"].push_back({{"x", traps.traps[t].x}, {"y", traps.traps[t].y}, {"ix", traps.cells[t].ix},
                          {"iy", traps.cells[t].iy}});
  }
  j["layout"] = traps.effort.layout();
  j["effort"] = json::array();
  for (int k = 0; k < traps.effort.n_primaries(); ++k)
    for (int l = 0; l < traps.effort.n_secondaries(k); ++l)
      for (int t = 0; t < traps.size(); ++t)
        if (traps.effort(t, k, l) > 0) j["effort"].push_back({t, k, l, traps.effort(t, k, l)});
  j["individuals"] = histories.ids();
  j["detections"] = json::array();
  for (int i = 0; i < histories.n_individuals(); ++i)
    for (int k = 0; k < histories.n_primaries(); ++k)
      for (int l = 0; l < histories.n_secondaries(k); ++l)
        if (histories(i, k, l) != CaptureHistories::kNone) j["detections"].push_back({i, k, l, histories(i, k, l)});
  return j;
}

Survey survey_from_json(const json& j) {
  Survey s;
  try {
    for (const auto& p : j.at("primaries")) {
      s.first.push_back(parse_timestamp(p.at("first").get<std::string>()));
      s.last.push_back(parse_timestamp(p.at("last").get<std::string>()));
    }
    s.delta = j.at("delta").get<std::vector<double>>();
    for (const auto& t : j.at("traps")) s.traps.push_back({t.at("x").get<double>(), t.at("y").get<double>()});
    const auto layout = j.at("layout").get<std::vector<int>>();
    s.effort = EffortArray(static_cast<int>(s.traps.size()), layout);
    for (const auto& e : j.at("effort")) s.effort(e[0].get<int>(), e[1].get<int>(), e[2].get<int>()) = e[3].get<int>();
    s.histories = CaptureHistories(layout);
    for (const auto& id : j.at("individuals")) s.histories.add_individual(id.get<std::string>());
    for (const auto& d : j.at("detections")) s.histories(d[0].get<int>(), d[1].get<int>(), d[2].get<int>()) = d[3].get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed ingest artifact ({})", e.what()));
  }
  return s;
}

Loaded load_model_data(const RunConfig& config, std::string_view stage) {
  Loaded out;
  out.survey = survey_from_json(read_json(require(config, stage, "ingest", "survey.json", "the ingested survey")));
  out.mesh = read_mesh(require(config, stage, "mesh", "mesh.csv", "the mesh").string());

  const auto tc = csv::Table::read(require(config, stage, "mesh", "trap_covariates.csv", "trap covariates"));
  if (tc.rows() != out.survey.traps.size()) throw ValidationError("trap covariates do not match the ingested traps");
  out.trap_covariates = CovariateTable(tc.rows());
  for (std::size_t c = 1; c < tc.header().size(); ++c) {
    Factor f;
    for (std::size_t r = 0; r < tc.rows(); ++r) {
      const auto& label = tc.cell(r, c);
      auto it = std::find(f.levels.begin(), f.levels.end(), label);
      if (it == f.levels.end()) f.levels.push_back(label);
    }
    std::sort(f.levels.begin(), f.levels.end());
    for (std::size_t r = 0; r < tc.rows(); ++r) {
      f.codes.push_back(static_cast<int>(std::find(f.levels.begin(), f.levels.end(), tc.cell(r, c)) - f.levels.begin()));
    }
    out.trap_covariates.set_factor(tc.header()[c], std::move(f));
  }

  std::vector<double> area(static_cast<std::size_t>(out.mesh.size()), out.mesh.cell_area_km2);
  out.data.scr = make_scr_data(distance_matrix(out.survey.traps, out.mesh.points), std::move(area), out.survey.effort,
                               out.survey.delta, out.survey.histories);
  const auto mid = out.survey.midpoint_years();
  out.data.frames = make_frames(out.trap_covariates, mid, out.mesh.covariates);
  out.data.traps = out.survey.traps;
  return out;
}

json spec_to_json(const ModelSpec& spec) {
  json j = json::object();
  for (Param p : kAllParams) j[std::string(param_name(p))] = spec[p].to_string();
  return j;
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  for (Param p : kAllParams) {
    const auto key = std::string(param_name(p));
    if (j.contains(key)) spec[p] = Formula::parse(j.at(key).get<std::string>());
  }
  return spec;
}

json fit_to_json(const FitResult& fit) {
  json j;
  j["model"] = fit.spec.describe();
  j["formulas"] = spec_to_json(fit.spec);
  j["names"] = fit.names;
  j["theta"] = std::vector<double>(fit.theta.data(), fit.theta.data() + fit.theta.size());
  j["has_vcov"] = fit.has_vcov;
  j["vcov"] = json::array();
  if (fit.has_vcov)
    for (Eigen::Index r = 0; r < fit.vcov.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(fit.vcov.cols()));
      for (Eigen::Index c = 0; c < fit.vcov.cols(); ++c) row[static_cast<std::size_t>(c)] = fit.vcov(r, c);
      j["vcov"].push_back(row);
    }
  j["loglik"] = number(fit.loglik);
  j["aic"] = number(fit.aic);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["message"] = fit.message;
  j["trace"] = json::array();
  for (double v : fit.trace) j["trace"].push_back(number(v));
  return j;
}

FitResult fit_from_json(const json& j) {
  FitResult f;
  try {
    f.spec = spec_from_json(j.at("formulas"));
    f.names = j.at("names").get<std::vector<std::string>>();
    const auto theta = j.at("theta").get<std::vector<double>>();
    f.theta = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    f.has_vcov = j.at("has_vcov").get<bool>();
    if (f.has_vcov) {
      const auto n = static_cast<Eigen::Index>(theta.size());
      f.vcov.resize(n, n);
      const auto& rows = j.at("vcov");
      if (static_cast<Eigen::Index>(rows.size()) != n) throw ValidationError("covariance size does not match theta");
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) f.vcov(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
    f.loglik = number_or(j.at("loglik"), -kInf);
    f.aic = number_or(j.at("aic"), kInf);
    f.converged = j.at("converged").get<bool>();
    f.iterations = j.at("iterations").get<int>();
    f.message = j.at("message").get<std::string>();
    for (const auto& v : j.at("trace")) f.trace.push_back(number_or(v, -kInf));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed fit artifact ({})", e.what()));
  }
  return f;
}

json record_to_json(const SelectionRecord& r) {
  return {{"stage", r.stage},         {"model", r.spec.describe()}, {"formulas", spec_to_json(r.spec)},
          {"n_params", r.n_params},   {"loglik", number(r.loglik)}, {"aic", number(r.aic)},
          {"converged", r.converged}, {"message", r.message}};
}

SelectionRecord record_from_json(const json& j) {
  SelectionRecord r;
  try {
    r.stage = j.at("stage").get<std::string>();
    r.spec = spec_from_json(j.at("formulas"));
    r.n_params = j.at("n_params").get<int>();
    r.loglik = number_or(j.at("loglik"), -kInf);
    r.aic = number_or(j.at("aic"), kInf);
    r.converged = j.at("converged").get<bool>();
    r.message = j.at("message").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed selection record ({})", e.what()));
  }
  return r;
}

CandidateSet read_candidates(const RunConfig& config, std::string_view stage) {
  const auto j = read_json(require(config, stage, "select", "candidates.json", "the candidate set"));
  CandidateSet c;
  try {
    for (const auto& f : j.at("fits")) c.fits.push_back(fit_from_json(f));
    c.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& r : j.at("history")) c.history.push_back(record_from_json(r));
    c.retained_df = j.at("retained_df").get<std::vector<std::vector<int>>>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed candidate set ({})", e.what()));
  }
  if (c.fits.empty() || c.fits.size() != c.weights.size()) throw ValidationError("candidate set is empty or unweighted");
  return c;
}

BootstrapDraws read_draws(const RunConfig& config, std::string_view stage) {
  const auto t = csv::Table::read(require(config, stage, "boot", "draws.csv", "bootstrap draws"));
  const auto cd = t.column("draw"), cm = t.column("model"), cv = t.column("value");
  BootstrapDraws out;
  std::vector<std::vector<double>> thetas;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const long d = t.integer(r, cd);
    if (d < 0) t.fail(r, "negative draw index");
    if (static_cast<std::size_t>(d) >= out.draws.size()) {
      if (static_cast<std::size_t>(d) != out.draws.size()) t.fail(r, "draws must be listed in order");
      out.draws.emplace_back();
      out.draws.back().model = static_cast<int>(t.integer(r, cm)) - 1;
      thetas.emplace_back();
    }
    thetas.back().push_back(t.number(r, cv));
  }
  for (std::size_t i = 0; i < out.draws.size(); ++i)
    out.draws[i].theta = Eigen::Map<const Vector>(thetas[i].data(), static_cast<Eigen::Index>(thetas[i].size()));
  if (out.draws.empty()) throw ValidationError("no bootstrap draws recorded");
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

void write_manifest(const RunConfig& config, std::string_view stage, const std::vector<fs::path>& inputs,
                    const json& settings) {
  const auto dir = config.output_dir / std::string(stage);
  json m;
  m["stage"] = stage;
  m["software"] = {{"name", "openscr"}, {"version", OPENSCR_VERSION}};
  if (!config.source.empty()) m["config"] = {{"path", config.source.string()}, {"sha256", sha256_file(config.source)}};
  m["settings"] = settings;
  m["inputs"] = json::array();
  for (const auto& p : inputs) m["inputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  std::vector<fs::path> outputs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") outputs.push_back(e.path());
  std::sort(outputs.begin(), outputs.end());
  m["outputs"] = json::array();
  for (const auto& p : outputs) m["outputs"].push_back({{"file", p.filename().string()}, {"sha256", sha256_file(p)}});
  write_json(dir / "manifest.json", m);
}

}  // namespace openscr::pipeline
