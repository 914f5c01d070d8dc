#pragma once

// Artifact layout and (de)serialization shared by the pipeline stages.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "openscr/fit.hpp"
#include "openscr/infer.hpp"
#include "openscr/mesh.hpp"
#include "openscr/pipeline.hpp"
#include "openscr/survey.hpp"

namespace openscr::pipeline {

using nlohmann::json;

/// <output_dir>/<stage>/<file>
fs::path artifact(const RunConfig& config, std::string_view stage, std::string_view file);

/// Path of an upstream artifact; throws MissingArtifact naming `stage` when absent.
fs::path require(const RunConfig& config, std::string_view stage, std::string_view upstream, std::string_view file,
                 std::string_view what);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

/// Everything ingest hands downstream.
struct Survey {
  std::vector<Timestamp> first;  ///< earliest survey start per primary
  std::vector<Timestamp> last;   ///< latest survey end per primary
  std::vector<double> delta;
  std::vector<Point> traps;
  EffortArray effort;
  CaptureHistories histories;

  int n_primaries() const { return static_cast<int>(first.size()); }
  Timestamp midpoint(int k) const { return first[k] + (last[k] - first[k]) / 2; }
  std::vector<double> midpoint_years() const;
};

json survey_to_json(const RobustDesign& design, const TrapArray& traps, const CaptureHistories& histories);
Survey survey_from_json(const json& j);

/// Model data assembled from the ingest and mesh artifacts.
struct Loaded {
  Survey survey;
  Mesh mesh;
  CovariateTable trap_covariates;
  ModelData data;
};

Loaded load_model_data(const RunConfig& config, std::string_view stage);

json fit_to_json(const FitResult& fit);
FitResult fit_from_json(const json& j);
json record_to_json(const SelectionRecord& r);
SelectionRecord record_from_json(const json& j);
json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const json& j);

CandidateSet read_candidates(const RunConfig& config, std::string_view stage);

/// Reads model index and working vector per draw (enough for simulation).
BootstrapDraws read_draws(const RunConfig& config, std::string_view stage);

/// Writes <stage>/manifest.json with SHA-256 digests of inputs and outputs.
void write_manifest(const RunConfig& config, std::string_view stage, const std::vector<fs::path>& inputs,
                    const json& settings);

}  // namespace openscr::pipeline
