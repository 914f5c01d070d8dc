#include "openscr/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace openscr {
namespace {

double segment_distance(const Point& p, const Point& a, const Point& b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

bool on_segment(const Point& p, const Point& a, const Point& b) {
  const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  const double scale = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), 1.0});
  if (std::abs(cross) > 1e-12 * scale * scale) return false;
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
         p.y <= std::max(a.y, b.y);
}

std::vector<Point> parse_ring(const nlohmann::json& ring, const std::string& where) {
  std::vector<Point> out;
  for (const auto& c : ring) {
    if (!c.is_array() || c.size() < 2) throw ValidationError(fmt::format("{}: malformed coordinate", where));
    out.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  if (out.size() >= 2 && out.front() == out.back()) out.pop_back();
  if (out.size() < 3) throw ValidationError(fmt::format("{}: ring with fewer than 3 vertices", where));
  return out;
}

Polygon parse_polygon(const nlohmann::json& coords, const std::string& where) {
  Polygon poly;
  for (const auto& ring : coords) poly.rings.push_back(parse_ring(ring, where));
  if (poly.rings.empty()) throw ValidationError(fmt::format("{}: polygon without rings", where));
  return poly;
}

}  // namespace

bool contains(const Polygon& polygon, const Point& p) {
  bool inside = false;
  for (const auto& ring : polygon.rings) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point& a = ring[i];
      const Point& b = ring[j];
      if (on_segment(p, a, b)) return true;
      if ((a.y > p.y) != (b.y > p.y)) {
        const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (p.x < x_cross) inside = !inside;
      }
    }
  }
  return inside;
}

bool contains(const Region& region, const Point& p) {
  return std::any_of(region.polygons.begin(), region.polygons.end(),
                     [&](const Polygon& poly) { return contains(poly, p); });
}

bool contains(const RegionSet& regions, const Point& p) {
  return std::any_of(regions.begin(), regions.end(), [&](const Region& r) { return contains(r, p); });
}

double distance_to_boundary(const Polygon& polygon, const Point& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ring : polygon.rings) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) best = std::min(best, segment_distance(p, ring[j], ring[i]));
  }
  return best;
}

double distance_to(const RegionSet& regions, const Point& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : regions) {
    for (const auto& poly : r.polygons) {
      if (contains(poly, p)) return 0.0;
      best = std::min(best, distance_to_boundary(poly, p));
    }
  }
  return best;
}

BoundingBox bounding_box(const RegionSet& regions) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingBox box{{inf, inf}, {-inf, -inf}};
  for (const auto& r : regions)
    for (const auto& poly : r.polygons)
      for (const auto& ring : poly.rings)
        for (const auto& v : ring) {
          box.min.x = std::min(box.min.x, v.x);
          box.min.y = std::min(box.min.y, v.y);
          box.max.x = std::max(box.max.x, v.x);
          box.max.y = std::max(box.max.y, v.y);
        }
  return box;
}

RegionSet read_regions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", path, e.what()));
  }
  const auto& features = doc.contains("features") ? doc["features"] : doc;
  if (!features.is_array()) throw ValidationError(fmt::format("{}: expected a FeatureCollection", path));
  RegionSet out;
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& feat = features[f];
    const std::string where = fmt::format("{}: feature {}", path, f);
    Region region;
    const auto props = feat.value("properties", nlohmann::json::object());
    if (props.contains("name")) {
      region.name = props["name"].is_string() ? props["name"].get<std::string>() : props["name"].dump();
    } else if (feat.contains("id")) {
      region.name = feat["id"].is_string() ? feat["id"].get<std::string>() : feat["id"].dump();
    } else {
      region.name = std::to_string(f);
    }
    if (!feat.contains("geometry")) throw ValidationError(fmt::format("{}: missing geometry", where));
    const auto& geom = feat["geometry"];
    const std::string type = geom.value("type", "");
    try {
      if (type == "Polygon") {
        region.polygons.push_back(parse_polygon(geom.at("coordinates"), where));
      } else if (type == "MultiPolygon") {
        for (const auto& poly : geom.at("coordinates")) region.polygons.push_back(parse_polygon(poly, where));
      } else {
        throw ValidationError(fmt::format("{}: unsupported geometry type '{}'", where, type));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{}: {}", where, e.what()));
    }
    out.push_back(std::move(region));
  }
  return out;
}

}  // namespace openscr
