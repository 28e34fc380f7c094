#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/error.hpp"
#include "slg/map.hpp"
#include "slg/relation.hpp"

namespace slg {

enum class Provenance { stage1_synthetic, stage2_synthetic, human };

inline std::string_view name_of(Provenance p) {
  switch (p) {
    case Provenance::stage1_synthetic: return "stage1-synthetic";
    case Provenance::stage2_synthetic: return "stage2-synthetic";
    case Provenance::human: return "human";
  }
  return "human";
}

inline Provenance provenance_named(std::string_view s) {
  if (s == "stage1-synthetic") return Provenance::stage1_synthetic;
  if (s == "stage2-synthetic") return Provenance::stage2_synthetic;
  if (s == "human") return Provenance::human;
  throw DatasetError("unknown provenance '" + std::string(s) + "'");
}

// One yes/no judgement: does `relation` to `landmark_id` describe `location`?
struct AnnotatedPoint {
  std::string map_id;
  std::string landmark_id;
  Vec2 location;
  Relation relation = Relation::near;
  int label = 0;
  Provenance provenance = Provenance::human;
  std::string annotator;
};

// Points plus the maps they refer to, keyed by map id. A map id doubles as
// the region id for region-level splits.
struct Dataset {
  std::map<std::string, WorldMap> maps;
  std::vector<AnnotatedPoint> points;

  const WorldMap& map_of(const AnnotatedPoint& p) const {
    auto it = maps.find(p.map_id);
    if (it == maps.end()) throw DatasetError("point refers to unknown map '" + p.map_id + "'");
    return it->second;
  }

  void add_map(WorldMap m) {
    const std::string key = m.id;
    maps.insert_or_assign(key, std::move(m));
  }

  // Throws when a point refers to a missing map or landmark or lies outside
  // its map.
  void validate() const {
    for (const auto& p : points) {
      const WorldMap& m = map_of(p);
      if (!m.find(p.landmark_id))
        throw DatasetError("point refers to unknown landmark '" + p.landmark_id + "' in map '" + p.map_id + "'");
      if (p.location.x < 0 || p.location.y < 0 || p.location.x > m.width || p.location.y > m.height)
        throw DatasetError("point location outside map '" + p.map_id + "'");
      if (p.label != 0 && p.label != 1) throw DatasetError("labels must be 0 or 1");
    }
  }
};

inline nlohmann::json to_json(const AnnotatedPoint& p) {
  nlohmann::json j = {{"map", p.map_id},
                      {"landmark", p.landmark_id},
                      {"location", {p.location.x, p.location.y}},
                      {"relation", std::string(name_of(p.relation))},
                      {"label", p.label},
                      {"provenance", std::string(name_of(p.provenance))}};
  if (!p.annotator.empty()) j["annotator"] = p.annotator;
  return j;
}

inline AnnotatedPoint annotated_point_from_json(const nlohmann::json& j) {
  try {
    AnnotatedPoint p;
    p.map_id = j.at("map").get<std::string>();
    p.landmark_id = j.at("landmark").get<std::string>();
    const auto& loc = j.at("location");
    p.location = {loc.at(0).get<double>(), loc.at(1).get<double>()};
    p.relation = relation_named(j.at("relation").get<std::string>());
    p.label = j.at("label").get<int>();
    p.provenance = provenance_named(j.value("provenance", std::string("human")));
    p.annotator = j.value("annotator", std::string());
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("malformed annotation record: ") + e.what());
  }
}

// One JSON object per line. Human annotation files carry an "annotator"
// field; synthetic ones a "provenance" tag.
inline std::vector<AnnotatedPoint> read_points(std::istream& in) {
  std::vector<AnnotatedPoint> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(annotated_point_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DatasetError& e) {
      throw DatasetError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_points(std::ostream& out, const std::vector<AnnotatedPoint>& points) {
  for (const auto& p : points) out << to_json(p).dump() << '\n';
}

}  // namespace slg
