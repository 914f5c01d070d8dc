#pragma once

#include <string>
#include <vector>

#include "openscr/common.hpp"

namespace openscr {

/// Polygon with an outer ring followed by optional holes. Rings are closed
/// implicitly; the last vertex need not repeat the first.
struct Polygon {
  std::vector<std::vector<Point>> rings;
};

/// A named region made of one or more polygons (a GeoJSON feature).
struct Region {
  std::string name;
  std::vector<Polygon> polygons;
};

/// Ordered list of named regions; order matters for boundary tie-breaks.
using RegionSet = std::vector<Region>;

/// Even-odd rule over all rings. Points exactly on an edge count as inside.
bool contains(const Polygon& polygon, const Point& p);
bool contains(const Region& region, const Point& p);
bool contains(const RegionSet& regions, const Point& p);

/// Euclidean distance from p to the nearest polygon edge.
double distance_to_boundary(const Polygon& polygon, const Point& p);

/// Distance from p to the region: 0 inside, else distance to the nearest edge.
double distance_to(const RegionSet& regions, const Point& p);

struct BoundingBox {
  Point min;
  Point max;
};
BoundingBox bounding_box(const RegionSet& regions);

/// Reads a GeoJSON FeatureCollection (Polygon / MultiPolygon geometries,
/// planar coordinates in meters). Region names come from the feature
/// property `name` (else `id`, else the feature index).
RegionSet read_regions(const std::string& path);

}  // namespace openscr
