#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/error.hpp"
#include "slg/geometry.hpp"
#include "slg/grid.hpp"

namespace slg {

struct Landmark {
  std::string id;
  std::string name;
  Polygon polygon;
  std::vector<Vec2> entrances;
};

struct SecurityCamera {
  std::string id;
  Vec2 position;
  double heading = 0.0;  // radians, counter-clockwise from east
  double fov = std::numbers::pi / 4.0;
  double range = 30.0;
};

struct WorldMap {
  std::string id;
  double width = 0.0;
  double height = 0.0;
  std::vector<Landmark> landmarks;
  std::vector<Polyline> roads;
  std::vector<SecurityCamera> cameras;

  const Landmark* find(std::string_view landmark_id) const {
    for (const auto& lm : landmarks)
      if (lm.id == landmark_id) return &lm;
    return nullptr;
  }

  const Landmark& at(std::string_view landmark_id) const {
    if (const auto* lm = find(landmark_id)) return *lm;
    throw MapError("unknown landmark id '" + std::string(landmark_id) + "' in map '" + id + "'");
  }

  // Default grid at the given resolution covering the whole extent.
  GridSpec grid(double resolution = 1.0) const { return GridSpec::covering(width, height, resolution); }

  bool inside_any_landmark(Vec2 p) const {
    return std::any_of(landmarks.begin(), landmarks.end(),
                       [&](const Landmark& lm) { return point_in_polygon(p, lm.polygon); });
  }
};

inline constexpr double kEntranceTolerance = 0.5;  // meters

// Landmark name -> id, keyed case-insensitively by the caller.
using Lexicon = std::unordered_map<std::string, std::string>;

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

inline Lexicon lexicon_of(const WorldMap& map) {
  Lexicon lex;
  for (const auto& lm : map.landmarks) lex[to_lower(lm.name)] = lm.id;
  return lex;
}

// Throws MapError when an invariant of WorldMap does not hold.
inline void validate(const WorldMap& map) {
  if (!(map.width > 0.0) || !(map.height > 0.0))
    throw MapError("map extent must be positive");
  const auto in_extent = [&](Vec2 p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 &&
           p.x <= map.width && p.y <= map.height;
  };
  std::set<std::string> ids;
  for (const auto& lm : map.landmarks) {
    if (lm.id.empty()) throw MapError("landmark with empty id");
    if (!ids.insert(lm.id).second) throw MapError("duplicate landmark id '" + lm.id + "'");
    if (lm.polygon.size() < 3)
      throw MapError("landmark '" + lm.id + "' polygon needs at least 3 vertices");
    for (const auto& v : lm.polygon)
      if (!in_extent(v)) throw MapError("landmark '" + lm.id + "' vertex outside map extent");
    if (!is_simple_polygon(lm.polygon))
      throw MapError("landmark '" + lm.id + "' polygon is not simple");
    for (const auto& e : lm.entrances)
      if (boundary_distance(e, lm.polygon) > kEntranceTolerance)
        throw MapError("landmark '" + lm.id + "' entrance is off the polygon boundary");
  }
  for (const auto& road : map.roads)
    for (const auto& v : road)
      if (!in_extent(v)) throw MapError("road vertex outside map extent");
  for (const auto& cam : map.cameras) {
    if (!in_extent(cam.position)) throw MapError("camera '" + cam.id + "' outside map extent");
    if (!(cam.range > 0.0)) throw MapError("camera '" + cam.id + "' range must be positive");
    if (!(cam.fov > 0.0)) throw MapError("camera '" + cam.id + "' fov must be positive");
  }
}

// --- map document (version 1) ---------------------------------------------

namespace detail {

inline Vec2 point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw MapError("expected [x, y] point");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

inline std::vector<Vec2> points_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw MapError("expected a list of points");
  std::vector<Vec2> pts;
  pts.reserve(j.size());
  for (const auto& p : j) pts.push_back(point_from_json(p));
  return pts;
}

inline nlohmann::json points_to_json(const std::vector<Vec2>& pts) {
  auto arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

}  // namespace detail

inline WorldMap map_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw MapError("map document must be an object");
    if (doc.value("version", 0) != 1) throw MapError("unsupported map document version");
    WorldMap map;
    map.id = doc.value("id", std::string("map"));
    const auto& extent = doc.at("extent");
    map.width = extent.at("width").get<double>();
    map.height = extent.at("height").get<double>();
    for (const auto& l : doc.value("landmarks", nlohmann::json::array())) {
      Landmark lm;
      lm.id = l.at("id").get<std::string>();
      lm.name = l.value("name", lm.id);
      lm.polygon = detail::points_from_json(l.at("polygon"));
      lm.entrances = detail::points_from_json(l.value("entrances", nlohmann::json::array()));
      map.landmarks.push_back(std::move(lm));
    }
    for (const auto& r : doc.value("roads", nlohmann::json::array()))
      map.roads.push_back(detail::points_from_json(r));
    for (const auto& c : doc.value("cameras", nlohmann::json::array())) {
      SecurityCamera cam;
      cam.id = c.at("id").get<std::string>();
      cam.position = detail::point_from_json(c.at("position"));
      cam.heading = c.value("heading_deg", 0.0) * std::numbers::pi / 180.0;
      cam.fov = c.value("fov_deg", 45.0) * std::numbers::pi / 180.0;
      cam.range = c.value("range_m", 30.0);
      map.cameras.push_back(std::move(cam));
    }
    validate(map);
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw MapError(std::string("malformed map document: ") + e.what());
  }
}

inline WorldMap load_map(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw MapError(std::string("malformed map document: ") + e.what());
  }
  return map_from_json(doc);
}

inline nlohmann::json map_to_json(const WorldMap& map) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["id"] = map.id;
  doc["extent"] = {{"width", map.width}, {"height", map.height}};
  doc["landmarks"] = nlohmann::json::array();
  for (const auto& lm : map.landmarks)
    doc["landmarks"].push_back({{"id", lm.id},
                                {"name", lm.name},
                                {"polygon", detail::points_to_json(lm.polygon)},
                                {"entrances", detail::points_to_json(lm.entrances)}});
  doc["roads"] = nlohmann::json::array();
  for (const auto& r : map.roads) doc["roads"].push_back(detail::points_to_json(r));
  doc["cameras"] = nlohmann::json::array();
  for (const auto& c : map.cameras)
    doc["cameras"].push_back({{"id", c.id},
                              {"position", {c.position.x, c.position.y}},
                              {"heading_deg", c.heading * 180.0 / std::numbers::pi},
                              {"fov_deg", c.fov * 180.0 / std::numbers::pi},
                              {"range_m", c.range}});
  return doc;
}

inline std::string save_map(const WorldMap& map) { return map_to_json(map).dump(2); }

// --- frames of reference ----------------------------------------------------

// One outward unit normal per entrance, taken from the boundary edge closest
// to the entrance (first edge wins on ties).
inline std::vector<Vec2> front_directions(const Landmark& lm) {
  std::vector<Vec2> dirs;
  const auto& poly = lm.polygon;
  const std::size_t n = poly.size();
  if (n < 3) return dirs;
  const bool ccw = signed_area(poly) > 0.0;
  for (const auto& e : lm.entrances) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = point_segment_distance(e, poly[i], poly[(i + 1) % n]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    const Vec2 edge = normalized(poly[(best + 1) % n] - poly[best]);
    // Counter-clockwise polygons have their interior on the left of each edge.
    dirs.push_back(ccw ? Vec2{edge.y, -edge.x} : Vec2{-edge.y, edge.x});
  }
  return dirs;
}

// --- rigid transforms -------------------------------------------------------

// Element of the dihedral group of the map rectangle: `quarter_turns`
// counter-clockwise rotations applied after an optional east-west mirror.
struct Dihedral {
  int quarter_turns = 0;
  bool mirror = false;

  Vec2 apply(Vec2 p, double width, double height) const {
    if (mirror) p.x = width - p.x;
    for (int k = 0; k < ((quarter_turns % 4) + 4) % 4; ++k) {
      p = {height - p.y, p.x};
      std::swap(width, height);
    }
    return p;
  }

  std::string suffix() const {
    if (quarter_turns == 0 && !mirror) return "";
    return "@r" + std::to_string(90 * (((quarter_turns % 4) + 4) % 4)) + (mirror ? "m" : "");
  }

  static std::vector<Dihedral> all() {
    std::vector<Dihedral> out;
    for (bool m : {false, true})
      for (int k = 0; k < 4; ++k) out.push_back({k, m});
    return out;
  }
};

inline WorldMap transformed(const WorldMap& map, Dihedral t) {
  WorldMap out = map;
  out.id = map.id + t.suffix();
  const auto f = [&](Vec2 p) { return t.apply(p, map.width, map.height); };
  for (auto& lm : out.landmarks) {
    for (auto& v : lm.polygon) v = f(v);
    for (auto& e : lm.entrances) e = f(e);
  }
  for (auto& road : out.roads)
    for (auto& v : road) v = f(v);
  const double angle = std::numbers::pi / 2.0 * t.quarter_turns;
  for (auto& cam : out.cameras) {
    cam.position = f(cam.position);
    double h = t.mirror ? std::numbers::pi - cam.heading : cam.heading;
    cam.heading = std::remainder(h + angle, 2.0 * std::numbers::pi);
  }
  if (((t.quarter_turns % 4) + 4) % 2 == 1) std::swap(out.width, out.height);
  return out;
}

// --- rasterization ----------------------------------------------------------

struct RasterStack {
  GridSpec spec;
  std::string focus;
  Grid<double> occupancy;
  Grid<double> focus_mask;
  Grid<double> entrances;
  Grid<double> roads;
  Grid<double> sdf;  // meters, negative inside the focus landmark

  static constexpr int kChannels = 5;
};

inline RasterStack rasterize(const WorldMap& map, std::string_view focus, const GridSpec& spec) {
  const Landmark* focus_lm = map.find(focus);
  if (!focus_lm) throw MapError("unknown focus landmark '" + std::string(focus) + "'");
  if (spec.rows <= 0 || spec.cols <= 0) throw GridError("grid must have at least one cell");

  RasterStack rs;
  rs.spec = spec;
  rs.focus = std::string(focus);
  rs.occupancy = Grid<double>(spec.rows, spec.cols, 0.0);
  rs.focus_mask = Grid<double>(spec.rows, spec.cols, 0.0);
  rs.entrances = Grid<double>(spec.rows, spec.cols, 0.0);
  rs.roads = Grid<double>(spec.rows, spec.cols, 0.0);
  rs.sdf = Grid<double>(spec.rows, spec.cols, 0.0);

  const double road_halfwidth = spec.resolution * std::numbers::sqrt2 / 2.0;
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const Vec2 p = spec.center(Cell{r, c});
      if (map.inside_any_landmark(p)) rs.occupancy(r, c) = 1.0;
      const double d = signed_distance(p, focus_lm->polygon);
      rs.sdf(r, c) = d;
      if (d <= 0.0) rs.focus_mask(r, c) = 1.0;
      for (const auto& road : map.roads) {
        bool hit = false;
        for (std::size_t i = 0; i + 1 < road.size() && !hit; ++i)
          hit = point_segment_distance(p, road[i], road[i + 1]) <= road_halfwidth;
        if (hit) {
          rs.roads(r, c) = 1.0;
          break;
        }
      }
    }
  }
  // Entrances of every landmark, dilated by one cell: every cell whose center
  // is strictly within 1.5 cells (Chebyshev) of the entrance. That is a 3x3
  // block in general and 2 cells wide where the entrance sits on a cell edge,
  // which keeps the channel equivariant under quarter turns and mirrors.
  for (const auto& lm : map.landmarks) {
    for (const auto& e : lm.entrances) {
      const Cell ec = spec.locate(e);
      for (int dr = -2; dr <= 2; ++dr)
        for (int dc = -2; dc <= 2; ++dc) {
          const Cell n{ec.row + dr, ec.col + dc};
          if (!spec.contains(n)) continue;
          const Vec2 ctr = spec.center(n);
          if (std::max(std::abs(ctr.x - e.x), std::abs(ctr.y - e.y)) < 1.5 * spec.resolution)
            rs.entrances(n.row, n.col) = 1.0;
        }
    }
  }
  return rs;
}

// Free-space mask (1 = outside every landmark) for the given grid.
inline Grid<unsigned char> free_mask(const WorldMap& map, const GridSpec& spec) {
  Grid<unsigned char> mask(spec.rows, spec.cols, 1);
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c)
      if (map.inside_any_landmark(spec.center(Cell{r, c}))) mask(r, c) = 0;
  return mask;
}

}  // namespace slg
