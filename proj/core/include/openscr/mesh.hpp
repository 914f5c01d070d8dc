#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openscr/covariates.hpp"
#include "openscr/geometry.hpp"

namespace openscr {

/// Discrete integration domain for activity centers. Points are cell
/// centers in meters; `covariates` always carries numeric `x` and `y` in km.
struct Mesh {
  std::vector<Point> points;
  double spacing_km = 1.0;
  double cell_area_km2 = 1.0;
  CovariateTable covariates;

  int size() const { return static_cast<int>(points.size()); }
  double total_area() const { return cell_area_km2 * static_cast<double>(points.size()); }
};

/// Salinity (or any scalar) raster sampled at cell centers.
struct Raster {
  std::vector<Point> centers;
  std::vector<double> values;
};

/// Grid of cell centers at `spacing_km` covering `boundary` dilated by
/// `buffer_km`, minus centers on `land`. The grid is anchored at `origin`
/// (meters) when given, else at the dilated bounding box's lower-left corner.
Mesh build_mesh(const RegionSet& boundary, const RegionSet& land, double buffer_km, double spacing_km,
                std::optional<Point> origin = std::nullopt);

/// Category of each point: the first region (in list order) containing it.
/// Throws ValidationError listing points no region covers.
Factor classify_points(std::span<const Point> points, const RegionSet& regions, const std::string& what);

/// Attaches a categorical covariate column to the mesh.
void attach_regions(Mesh& mesh, const std::string& name, const RegionSet& regions);

/// Mean of raster cells whose centers lie within `radius_km` of each mesh
/// point, stored as column `name` (default `avg_salinity`).
void attach_salinity(Mesh& mesh, const Raster& raster, double radius_km, const std::string& name = "avg_salinity");

/// r[j][m]: Euclidean trap-to-mesh distances in meters.
Matrix distance_matrix(std::span<const Point> traps, std::span<const Point> mesh);

Raster read_raster(const std::string& path);

/// `mesh.csv`: x,y,area,stratum,openness,avg_salinity (columns present in
/// the mesh; x,y in meters).
void write_mesh(const Mesh& mesh, const std::string& path);
Mesh read_mesh(const std::string& path);

}  // namespace openscr
