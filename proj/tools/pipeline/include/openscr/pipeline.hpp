#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "openscr/select.hpp"

namespace openscr::pipeline {

namespace fs = std::filesystem;

/// Input files. Relative paths in the config file resolve against the
/// config file's directory. Region files are GeoJSON; `land`, `strata` and
/// `openness` are optional.
struct InputPaths {
  fs::path sightings;
  fs::path tracks;
  fs::path occasions;
  fs::path boundary;
  fs::path land;
  fs::path strata;
  fs::path openness;
  fs::path salinity;
};

struct RunConfig {
  fs::path source;  ///< the config file itself, empty when built in code
  InputPaths inputs;

  double grid_origin_x = 0.0;
  double grid_origin_y = 0.0;
  double cell_size_m = 1000.0;

  double buffer_km = 1.0;
  double spacing_km = 1.0;
  double salinity_radius_km = 1.0;
  double marked_proportion = 1.0;

  ModelSpec base;
  std::vector<Stage> stages;
  double aic_window = 2.0;
  int max_iterations = 500;

  int n_draws = 1000;
  std::uint64_t boot_seed = 1;
  int gof_sims = 199;
  std::uint64_t gof_seed = 2;
  bool gof_fixed = false;           ///< simulate from the best fit instead of resampling draws
  std::string gof_group_by;         ///< trap covariate for the per-trap test, e.g. "stratum"
  double iqd_threshold = 0.95;

  fs::path output_dir;
};

/// Reads and validates a JSON config. Throws ValidationError.
RunConfig load_config(const fs::path& path);

/// Checks paths and thresholds. Throws ValidationError naming the field.
void validate(const RunConfig& config);

inline constexpr std::string_view kStages[] = {"ingest", "mesh", "fit", "select", "boot", "gof", "report"};

struct RunOptions {
  std::string stage = "all";
  unsigned threads = 1;
  std::optional<std::uint64_t> seed_override;  ///< replaces the bootstrap and gof seeds
};

/// Thrown when a stage needs an artifact an earlier stage has not written.
class MissingArtifact : public ValidationError {
 public:
  MissingArtifact(const std::string& stage, const std::string& what);
};

/// Runs one stage, or every stage in order for "all".
void run(const RunConfig& config, const RunOptions& options);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

}  // namespace openscr::pipeline
