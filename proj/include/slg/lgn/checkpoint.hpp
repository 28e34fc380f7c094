#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "slg/lgn/model.hpp"

namespace slg::lgn {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const LgnConfig& c) {
  return {{"channels", c.channels},     {"features", c.features}, {"map_embedding", c.map_embedding},
          {"relation_embedding", c.relation_embedding}, {"hidden", c.hidden}, {"roi", c.roi},
          {"levels", c.levels},         {"single_level", c.single_level}};
}

inline LgnConfig config_from_json(const nlohmann::json& j) {
  LgnConfig c;
  c.channels = j.at("channels").get<int>();
  c.features = j.at("features").get<int>();
  c.map_embedding = j.at("map_embedding").get<int>();
  c.relation_embedding = j.at("relation_embedding").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.roi = j.at("roi").get<int>();
  c.levels = j.at("levels").get<int>();
  c.single_level = j.at("single_level").get<bool>();
  return c;
}

// Versioned document: architecture descriptor plus flat weight arrays.
// Doubles are written in shortest round-trip form, so loading is lossless.
inline std::string save_model(const LgnModel& m) {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [name, v] : m.parameters()) weights[name] = *v;
  return nlohmann::json{{"format", "slg-lgn"}, {"version", kCheckpointVersion}, {"architecture", to_json(m.config)},
                        {"weights", weights}}
      .dump();
}

// When `expected` is given, a checkpoint of any other architecture is rejected.
inline LgnModel load_model(std::string_view bytes, const std::optional<LgnConfig>& expected = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("CorruptCheckpoint", std::string("unreadable checkpoint: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != "slg-lgn")
      throw ModelError("CorruptCheckpoint", "not a network checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw ModelError("VersionMismatch", "checkpoint version " + std::to_string(version) + " is not supported");
    const LgnConfig cfg = config_from_json(j.at("architecture"));
    if (expected && !(*expected == cfg))
      throw ModelError("ArchitectureMismatch", "checkpoint architecture differs from the requested configuration");
    LgnModel m = LgnModel::zeros(cfg);
    const auto& w = j.at("weights");
    for (auto& [name, v] : m.parameters()) {
      const auto arr = w.at(name).get<std::vector<double>>();
      if (arr.size() != v->size())
        throw ModelError("CorruptCheckpoint", "weight array '" + name + "' has the wrong length");
      *v = arr;
    }
    if (!m.finite()) throw ModelError("CorruptCheckpoint", "checkpoint contains non-finite weights");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("CorruptCheckpoint", std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace slg::lgn
