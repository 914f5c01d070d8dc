#include "openscr/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include <fmt/format.h>

#include "openscr/csv.hpp"
#include "openscr/parallel.hpp"

namespace openscr {
namespace {

constexpr double kMetersPerKm = 1000.0;

Factor make_factor(const std::vector<std::string>& labels) {
  const std::set<std::string> unique(labels.begin(), labels.end());
  Factor f;
  f.levels.assign(unique.begin(), unique.end());
  f.codes.reserve(labels.size());
  for (const auto& s : labels)
    f.codes.push_back(static_cast<int>(std::lower_bound(f.levels.begin(), f.levels.end(), s) - f.levels.begin()));
  return f;
}

void set_xy_km(Mesh& mesh) {
  std::vector<double> xs, ys;
  xs.reserve(mesh.points.size());
  ys.reserve(mesh.points.size());
  for (const auto& p : mesh.points) {
    xs.push_back(p.x / kMetersPerKm);
    ys.push_back(p.y / kMetersPerKm);
  }
  mesh.covariates.set_numeric("x", std::move(xs));
  mesh.covariates.set_numeric("y", std::move(ys));
}

}  // namespace

Mesh build_mesh(const RegionSet& boundary, const RegionSet& land, double buffer_km, double spacing_km,
                std::optional<Point> origin) {
  if (!(spacing_km > 0.0)) throw ValidationError("mesh spacing must be positive");
  if (!(buffer_km >= 0.0)) throw ValidationError("mesh buffer must be non-negative");
  if (boundary.empty()) throw ValidationError("mesh boundary has no polygons");

  const double spacing = spacing_km * kMetersPerKm;
  const double buffer = buffer_km * kMetersPerKm;
  const BoundingBox box = bounding_box(boundary);
  const Point lo{box.min.x - buffer, box.min.y - buffer};
  const Point hi{box.max.x + buffer, box.max.y + buffer};
  const Point org = origin.value_or(lo);

  const long ix0 = static_cast<long>(std::floor((lo.x - org.x) / spacing));
  const long iy0 = static_cast<long>(std::floor((lo.y - org.y) / spacing));
  const long ix1 = static_cast<long>(std::ceil((hi.x - org.x) / spacing));
  const long iy1 = static_cast<long>(std::ceil((hi.y - org.y) / spacing));

  std::vector<Point> candidates;
  for (long iy = iy0; iy <= iy1; ++iy)
    for (long ix = ix0; ix <= ix1; ++ix)
      candidates.push_back({org.x + (static_cast<double>(ix) + 0.5) * spacing,
                            org.y + (static_cast<double>(iy) + 0.5) * spacing});

  const double tol = 1e-9 * spacing;
  std::vector<char> keep(candidates.size(), 0);
  parallel_for(candidates.size(), [&](std::size_t i) {
    const Point& c = candidates[i];
    keep[i] = distance_to(boundary, c) <= buffer + tol && !contains(land, c);
  });

  Mesh mesh;
  mesh.spacing_km = spacing_km;
  mesh.cell_area_km2 = spacing_km * spacing_km;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (keep[i]) mesh.points.push_back(candidates[i]);
  if (mesh.points.empty()) throw ValidationError("mesh is empty: boundary, buffer and land leave no cells");
  mesh.covariates = CovariateTable(mesh.points.size());
  set_xy_km(mesh);
  return mesh;
}

Factor classify_points(std::span<const Point> points, const RegionSet& regions, const std::string& what) {
  std::vector<std::string> labels(points.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto it = std::find_if(regions.begin(), regions.end(), [&](const Region& r) { return contains(r, points[i]); });
    if (it == regions.end()) {
      missing.push_back(i);
    } else {
      labels[i] = it->name;
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t n = 0; n < std::min<std::size_t>(missing.size(), 10); ++n) {
      const auto& p = points[missing[n]];
      list += fmt::format("{}#{} ({}, {})", n ? "; " : "", missing[n], p.x, p.y);
    }
    throw ValidationError(fmt::format("{} point(s) not covered by any '{}' region: {}{}", missing.size(), what, list,
                                      missing.size() > 10 ? "; ..." : ""));
  }
  return make_factor(labels);
}

void attach_regions(Mesh& mesh, const std::string& name, const RegionSet& regions) {
  mesh.covariates.set_factor(name, classify_points(mesh.points, regions, name));
}

void attach_salinity(Mesh& mesh, const Raster& raster, double radius_km, const std::string& name) {
  if (!(radius_km > 0.0)) throw ValidationError("salinity averaging radius must be positive");
  const double r2 = radius_km * kMetersPerKm * radius_km * kMetersPerKm;
  std::vector<double> values(mesh.points.size(), 0.0);
  std::vector<char> covered(mesh.points.size(), 0);
  parallel_for(mesh.points.size(), [&](std::size_t m) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < raster.centers.size(); ++c) {
      if (squared_distance(raster.centers[c], mesh.points[m]) <= r2) {
        sum += raster.values[c];
        ++n;
      }
    }
    if (n > 0) {
      values[m] = sum / static_cast<double>(n);
      covered[m] = 1;
    }
  });
  std::string list;
  std::size_t n_missing = 0;
  for (std::size_t m = 0; m < covered.size(); ++m) {
    if (covered[m]) continue;
    if (n_missing < 10) list += fmt::format("{}#{} ({}, {})", n_missing ? "; " : "", m, mesh.points[m].x, mesh.points[m].y);
    ++n_missing;
  }
  if (n_missing) {
    throw ValidationError(
        fmt::format("{} mesh point(s) have no raster cell within {} km: {}{}", n_missing, radius_km, list,
                    n_missing > 10 ? "; ..." : ""));
  }
  mesh.covariates.set_numeric(name, std::move(values));
}

Matrix distance_matrix(std::span<const Point> traps, std::span<const Point> mesh) {
  Matrix r(static_cast<Eigen::Index>(traps.size()), static_cast<Eigen::Index>(mesh.size()));
  for (std::size_t m = 0; m < mesh.size(); ++m)
    for (std::size_t j = 0; j < traps.size(); ++j)
      r(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) = distance(traps[j], mesh[m]);
  return r;
}

Raster read_raster(const std::string& path) {
  const auto t = csv::Table::read(path);
  const auto cx = t.column("x"), cy = t.column("y"), cv = t.column("value");
  Raster r;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    r.centers.push_back({t.number(i, cx), t.number(i, cy)});
    r.values.push_back(t.number(i, cv));
  }
  if (r.values.empty()) throw ValidationError(fmt::format("{}: raster has no cells", path));
  return r;
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  std::vector<std::string> cols{"x", "y", "area"};
  std::vector<std::string> extra;
  for (const auto& name : {"stratum", "openness", "avg_salinity"})
    if (mesh.covariates.has(name)) extra.emplace_back(name);
  for (const auto& name : mesh.covariates.names())
    if (name != "x" && name != "y" && std::find(extra.begin(), extra.end(), name) == extra.end()) extra.push_back(name);
  cols.insert(cols.end(), extra.begin(), extra.end());
  csv::Writer w(path, cols);
  for (int m = 0; m < mesh.size(); ++m) {
    w.add(mesh.points[m].x).add(mesh.points[m].y).add(mesh.cell_area_km2);
    for (const auto& name : extra) {
      if (mesh.covariates.is_factor(name)) {
        const auto& f = mesh.covariates.factor(name);
        w.add(f.levels[f.codes[m]]);
      } else {
        w.add(mesh.covariates.numeric(name)[m]);
      }
    }
    w.end_row();
  }
}

Mesh read_mesh(const std::string& path) {
  const auto t = csv::Table::read(path);
  const auto cx = t.column("x"), cy = t.column("y"), ca = t.column("area");
  Mesh mesh;
  for (std::size_t i = 0; i < t.rows(); ++i) mesh.points.push_back({t.number(i, cx), t.number(i, cy)});
  if (mesh.points.empty()) throw ValidationError(fmt::format("{}: mesh has no points", path));
  mesh.cell_area_km2 = t.number(0, ca);
  for (std::size_t i = 1; i < t.rows(); ++i)
    if (t.number(i, ca) != mesh.cell_area_km2) t.fail(i, "mesh cells must share one area");
  mesh.spacing_km = std::sqrt(mesh.cell_area_km2);
  mesh.covariates = CovariateTable(mesh.points.size());
  set_xy_km(mesh);
  for (std::size_t c = 0; c < t.header().size(); ++c) {
    const auto& name = t.header()[c];
    if (c == cx || c == cy || c == ca) continue;
    bool numeric = true;
    std::vector<double> values(t.rows());
    for (std::size_t i = 0; i < t.rows() && numeric; ++i) {
      const auto& s = t.cell(i, c);
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), values[i]);
      numeric = ec == std::errc() && ptr == s.data() + s.size();
    }
    if (numeric) {
      mesh.covariates.set_numeric(name, std::move(values));
    } else {
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < t.rows(); ++i) labels.push_back(t.cell(i, c));
      mesh.covariates.set_factor(name, make_factor(labels));
    }
  }
  return mesh;
}

}  // namespace openscr
