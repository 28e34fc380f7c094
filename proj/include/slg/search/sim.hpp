#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/belief.hpp"
#include "slg/corpus.hpp"
#include "slg/expert.hpp"
#include "slg/map.hpp"
#include "slg/parser.hpp"
#include "slg/search/planner.hpp"

namespace slg {

// --- modes and configuration --------------------------------------------------

enum class SearchMode { human_robot, robot_only, human_only, uninformed };

inline constexpr std::array<SearchMode, 4> kAllModes = {SearchMode::human_robot, SearchMode::robot_only,
                                                        SearchMode::human_only, SearchMode::uninformed};

inline std::string_view name_of(SearchMode m) {
  switch (m) {
    case SearchMode::human_robot: return "human-robot";
    case SearchMode::robot_only: return "robot-only";
    case SearchMode::human_only: return "human-only";
    case SearchMode::uninformed: return "uninformed";
  }
  return "?";
}

inline SearchMode mode_named(std::string_view s) {
  for (auto m : kAllModes)
    if (name_of(m) == s) return m;
  throw ConfigError("unknown search mode '" + std::string(s) + "'");
}

constexpr bool fuses_sensor(SearchMode m) { return m == SearchMode::human_robot || m == SearchMode::robot_only; }
constexpr bool fuses_human(SearchMode m) { return m == SearchMode::human_robot || m == SearchMode::human_only; }

struct ScenarioConfig {
  std::string map_id;
  std::uint64_t seed = 0;
  Cell robot_start;
  Cell target;
  SearchMode mode = SearchMode::human_robot;
  int max_steps = 10000;
  double robot_speed = 1.0;    // m/s
  double detector_rate = 1.0;  // Hz, one step per detector frame
  double true_positive = 0.8;
  double true_negative = 0.8;
  double detector_range = 25.0;
  int human_cadence = 10;  // steps between utterance opportunities
  bool scripted_speaker = true;  // off when a live operator supplies the sentences
  double negative_probability = 0.5;
  double resolution = 1.0;
  std::string target_word = "bag";

  SensorModel sensor() const { return {true_positive, true_negative, detector_range}; }

  // Grid cells the robot advances per step.
  int cells_per_step() const {
    const double c = robot_speed / (detector_rate * resolution);
    return static_cast<int>(std::lround(c));
  }

  void validate() const {
    if (!(robot_speed > 0) || !(detector_rate > 0) || !(resolution > 0)) throw ConfigError("rates must be positive");
    const double c = robot_speed / (detector_rate * resolution);
    if (c < 1.0 - 1e-9 || std::abs(c - std::round(c)) > 1e-9)
      throw ConfigError("robot speed must cover a whole number of cells per detector frame");
    if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
    if (human_cadence < 1) throw ConfigError("human_cadence must be at least 1");
    if (!(negative_probability >= 0 && negative_probability <= 1))
      throw ConfigError("negative_probability must lie in [0, 1]");
    sensor().validate();
  }
};

inline nlohmann::json to_json(const ScenarioConfig& c) {
  return {{"map", c.map_id},
          {"seed", c.seed},
          {"robot_start", {c.robot_start.row, c.robot_start.col}},
          {"target", {c.target.row, c.target.col}},
          {"mode", name_of(c.mode)},
          {"max_steps", c.max_steps},
          {"robot_speed", c.robot_speed},
          {"detector_rate", c.detector_rate},
          {"true_positive", c.true_positive},
          {"true_negative", c.true_negative},
          {"detector_range", c.detector_range},
          {"human_cadence", c.human_cadence},
          {"scripted_speaker", c.scripted_speaker},
          {"negative_probability", c.negative_probability},
          {"resolution", c.resolution},
          {"target_word", c.target_word}};
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioConfig c;
    const auto cell = [](const nlohmann::json& a) { return Cell{a.at(0).get<int>(), a.at(1).get<int>()}; };
    c.map_id = j.at("map").get<std::string>();
    c.seed = j.value("seed", c.seed);
    c.robot_start = cell(j.at("robot_start"));
    c.target = cell(j.at("target"));
    c.mode = mode_named(j.value("mode", std::string(name_of(c.mode))));
    c.max_steps = j.value("max_steps", c.max_steps);
    c.robot_speed = j.value("robot_speed", c.robot_speed);
    c.detector_rate = j.value("detector_rate", c.detector_rate);
    c.true_positive = j.value("true_positive", c.true_positive);
    c.true_negative = j.value("true_negative", c.true_negative);
    c.detector_range = j.value("detector_range", c.detector_range);
    c.human_cadence = j.value("human_cadence", c.human_cadence);
    c.scripted_speaker = j.value("scripted_speaker", c.scripted_speaker);
    c.negative_probability = j.value("negative_probability", c.negative_probability);
    c.resolution = j.value("resolution", c.resolution);
    c.target_word = j.value("target_word", c.target_word);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario document: ") + e.what());
  }
}

// --- sensing ------------------------------------------------------------------

// 360-degree detector: fires with probability TP inside the range and 1 - TN
// outside it.
template <class Rng>
SensorObservation simulate_detection(Vec2 robot, Vec2 target, const SensorModel& s, Rng& rng, int step = 0) {
  const bool in_range = distance(robot, target) <= s.range;
  std::bernoulli_distribution fire(in_range ? s.true_positive : 1.0 - s.true_negative);
  return {robot, fire(rng), step};
}

inline double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

// Range, half-angle and line-of-sight test; buildings are the only occluders.
inline bool camera_visible(const SecurityCamera& cam, Vec2 target, const WorldMap& map) {
  const Vec2 d = target - cam.position;
  if (norm(d) > cam.range) return false;
  if (norm(d) > 0 && std::abs(wrap_angle(std::atan2(d.y, d.x) - cam.heading)) > cam.fov / 2.0) return false;
  for (const auto& lm : map.landmarks)
    if (segment_hits_polygon(cam.position, target, lm.polygon)) return false;
  return true;
}

inline bool visible_to_any_camera(const WorldMap& map, Vec2 target) {
  return std::any_of(map.cameras.begin(), map.cameras.end(),
                     [&](const SecurityCamera& c) { return camera_visible(c, target, map); });
}

// --- grounded field cache -------------------------------------------------------

// Expert fields per (relation, landmark) on one grid, computed on first use.
// Safe to share between simulations of the same map.
class FieldCache {
 public:
  FieldCache(std::shared_ptr<const WorldMap> map, GridSpec spec, ExpertParams params)
      : map_(std::move(map)), spec_(spec), params_(params), free_(slg::free_mask(*map_, spec_)) {
    params_.validate();
  }

  const WorldMap& map() const { return *map_; }
  const GridSpec& spec() const { return spec_; }
  const ExpertParams& params() const { return params_; }

  const LikelihoodField& field(Relation r, const std::string& landmark_id) {
    std::lock_guard lock(mu_);
    auto key = std::make_pair(index_of(r), landmark_id);
    auto it = fields_.find(key);
    if (it == fields_.end())
      it = fields_.emplace(key, std::make_unique<Entry>(ground_field(r, landmark_id, *map_, spec_, params_))).first;
    return it->second->field;
  }

  // Mean field value over free cells; smaller means a more specific phrase.
  double mean(Relation r, const std::string& landmark_id) {
    const auto& f = field(r, landmark_id);
    std::lock_guard lock(mu_);
    auto& e = *fields_.at({index_of(r), landmark_id});
    if (!e.mean) {
      const auto& free = free_mask();
      double s = 0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < f.values.size(); ++i)
        if (free[i]) s += f.values[i], ++n;
      e.mean = n ? s / static_cast<double>(n) : 0.0;
    }
    return *e.mean;
  }

  Grounder grounder() {
    return [this](Relation r, const std::string& id) { return field(r, id); };
  }

  const Grid<unsigned char>& free_mask() const { return free_; }

 private:
  struct Entry {
    explicit Entry(LikelihoodField f) : field(std::move(f)) {}
    LikelihoodField field;
    std::optional<double> mean;
  };
  std::shared_ptr<const WorldMap> map_;
  GridSpec spec_;
  ExpertParams params_;
  Grid<unsigned char> free_;
  std::mutex mu_;
  std::map<std::pair<int, std::string>, std::unique_ptr<Entry>> fields_;
};

// --- scripted human -------------------------------------------------------------

struct HumanUtterance {
  std::string sentence;
  SpatialObservation truth;
};

// Relations a describing human uses; "far from" carries almost no position
// information and is left out.
inline constexpr std::array<Relation, 9> kDescriptiveRelations = {
    Relation::at,     Relation::near,    Relation::close_to, Relation::in_front_of, Relation::behind,
    Relation::next_to, Relation::beside, Relation::by,       Relation::around};

// (relation, landmark) whose field is highest at the target cell; ties go to
// the more specific field (lower mean), then to map and relation order.
inline std::pair<Relation, std::string> describe_target(FieldCache& cache, Cell target) {
  const auto& spec = cache.spec();
  const std::size_t ti = spec.index(target);
  std::optional<std::pair<Relation, std::string>> best;
  double best_p = -1, best_mean = 0;
  for (const auto& lm : cache.map().landmarks)
    for (Relation r : kDescriptiveRelations) {
      const double p = cache.field(r, lm.id).values[ti];
      if (p < best_p) continue;
      const double m = cache.mean(r, lm.id);
      if (p > best_p || m < best_mean) best = {r, lm.id}, best_p = p, best_mean = m;
    }
  if (!best) throw MapError("map has no landmarks to describe the target with");
  return *best;
}

inline constexpr std::array<Relation, 8> kNegatableRelations = {
    Relation::near,    Relation::close_to, Relation::in_front_of, Relation::behind,
    Relation::next_to, Relation::beside,   Relation::by,          Relation::around};

inline double mass_under(const BeliefGrid& b, const Grid<double>& f) {
  double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += b.mass()[i] * f[i];
  return s;
}

// A true negative statement about the region holding the most posterior
// mass: landmarks are ranked by posterior mass near them, and the first one
// with a relation whose field is below one half at the target is used.
inline std::optional<std::pair<Relation, std::string>> deny_region(FieldCache& cache, const BeliefGrid& b,
                                                                   Cell target) {
  const std::size_t ti = cache.spec().index(target);
  std::vector<std::pair<double, std::size_t>> ranked;
  const auto& lms = cache.map().landmarks;
  for (std::size_t i = 0; i < lms.size(); ++i)
    ranked.emplace_back(-mass_under(b, cache.field(Relation::near, lms[i].id).values), i);
  std::sort(ranked.begin(), ranked.end());
  for (const auto& [neg_mass, i] : ranked) {
    std::optional<Relation> pick;
    double pick_mass = -1;
    for (Relation r : kNegatableRelations) {
      const auto& f = cache.field(r, lms[i].id).values;
      if (f[ti] >= 0.5) continue;
      const double m = mass_under(b, f);
      if (m > pick_mass) pick = r, pick_mass = m;
    }
    if (pick) return std::make_pair(*pick, lms[i].id);
  }
  return std::nullopt;
}

// Batch-mode stand-in for the remote operator. Called every step; speaks only
// on step 1 and every `human_cadence` steps after it. Each speaking step draws
// exactly two numbers from `rng`, so timing is independent of the belief.
template <class Rng>
std::optional<HumanUtterance> scripted_human(int step, FieldCache& cache, const BeliefGrid& b, Cell target,
                                             const ScenarioConfig& cfg, Rng& rng) {
  if (step <= 0 || (step - 1) % cfg.human_cadence != 0) return std::nullopt;
  const double coin = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  std::mt19937_64 text_rng(rng());
  const Vec2 at = cache.spec().center(target);
  std::optional<std::pair<Relation, std::string>> choice;
  bool negated = false;
  if (visible_to_any_camera(cache.map(), at)) {
    choice = describe_target(cache, target);
  } else if (coin < cfg.negative_probability) {
    choice = deny_region(cache, b, target);
    negated = true;
  }
  if (!choice) return std::nullopt;
  const Landmark& lm = cache.map().at(choice->second);
  Utterance u{cfg.target_word, choice->first, lm.name, lm.id, negated};
  CorpusStyle style;
  const bool sp = detail::coin(text_rng, style.subject_predicate);
  const bool active = detail::coin(text_rng, style.active_voice);
  HumanUtterance out;
  out.sentence = render_sentence({u}, sp, active, style, text_rng);
  out.truth = SpatialObservation{u.target, u.relation, u.landmark_id, u.negated, {}};
  return out;
}

// --- simulation -------------------------------------------------------------------

struct SearchResult {
  bool success = false;
  int steps = 0;
  std::vector<double> entropy;  // after each step, index 0 = prior
  nlohmann::json events = nlohmann::json::array();
  Cell final_robot;
  double final_distance = 0;
};

inline nlohmann::json to_json(const SearchResult& r) {
  return {{"success", r.success},
          {"steps", r.steps},
          {"final_robot", {r.final_robot.row, r.final_robot.col}},
          {"final_distance", r.final_distance},
          {"entropy", r.entropy},
          {"events", r.events}};
}

struct SentenceOutcome {
  bool ok = false;
  std::vector<SpatialObservation> observations;
  std::string error_kind;
  std::string error_message;
  std::string phrase;
  UpdateStatus status = UpdateStatus::ok;
};

// One search episode. Random streams: the detector and the scripted human
// each own an engine seeded from (seed, stream id), so modes that share a
// seed see the same detector draws and the same utterance timing.
class Simulation {
 public:
  enum Stream : std::uint64_t { detector_stream = 1, human_stream = 2 };

  Simulation(ScenarioConfig cfg, std::shared_ptr<FieldCache> cache, bool record_events = true,
             Grounder grounder = {})
      : cfg_(std::move(cfg)), cache_(std::move(cache)), record_(record_events) {
    cfg_.validate();
    if (!(cache_->spec() == cache_->map().grid(cfg_.resolution)))
      throw ConfigError("field cache grid does not match the scenario resolution");
    const auto& spec = cache_->spec();
    const auto& free = cache_->free_mask();
    for (Cell c : {cfg_.robot_start, cfg_.target})
      if (!spec.contains(c) || !free(c.row, c.col)) throw ConfigError("robot start and target must be free cells");
    grounder_ = grounder ? std::move(grounder) : cache_->grounder();
    lexicon_ = lexicon_of(cache_->map());
    detector_rng_ = engine(detector_stream);
    human_rng_ = engine(human_stream);
    belief_ = init_prior(spec, free);
    robot_ = cfg_.robot_start;
    cached_entropy_ = entropy(belief_);
    result_.entropy.push_back(cached_entropy_);
    replan();
  }

  const ScenarioConfig& config() const { return cfg_; }
  const WorldMap& map() const { return cache_->map(); }
  const BeliefGrid& belief() const { return belief_; }
  Cell robot() const { return robot_; }
  Cell goal() const { return goal_; }
  int step_count() const { return step_; }
  bool done() const { return done_; }
  bool success() const { return result_.success; }
  bool target_visible() const { return visible_to_any_camera(map(), center(cfg_.target)); }
  const std::vector<double>& entropy_trace() const { return result_.entropy; }
  const nlohmann::json& events() const { return result_.events; }

  // Remaining plan, current cell first.
  std::vector<Cell> plan() const {
    if (plan_pos_ >= plan_.size()) return {robot_};
    return {plan_.begin() + static_cast<std::ptrdiff_t>(plan_pos_), plan_.end()};
  }

  // One detector frame: move, sense, fuse, listen, replan.
  void step() {
    if (done_) return;
    ++step_;
    for (int k = 0; k < cfg_.cells_per_step() && plan_pos_ + 1 < plan_.size(); ++k) robot_ = plan_[++plan_pos_];
    log({{"type", "move"}, {"cell", {robot_.row, robot_.col}}});

    const Vec2 r = center(robot_), t = center(cfg_.target);
    const auto z = simulate_detection(r, t, cfg_.sensor(), detector_rng_, step_);
    const bool in_range = distance(r, t) <= cfg_.detector_range;
    const bool found = z.detected && in_range;
    log({{"type", "detection"}, {"detected", z.detected}, {"fused", fuses_sensor(cfg_.mode) && !found}});
    if (found) {
      result_.success = true;
      finish();
      log({{"type", "success"}});
      return;
    }
    if (fuses_sensor(cfg_.mode)) {
      update_sensor(belief_, z, cfg_.sensor());
      ++version_;
    }
    std::optional<HumanUtterance> said;
    if (cfg_.scripted_speaker) said = scripted_human(step_, *cache_, belief_, cfg_.target, cfg_, human_rng_);
    if (said && fuses_human(cfg_.mode)) apply_sentence(said->sentence, "human");
    refresh_entropy();
    replan();
    if (step_ >= cfg_.max_steps) finish();
  }

  // Operator sentence from outside the batch loop (service path).
  SentenceOutcome submit_sentence(const std::string& text) { return apply_sentence(text, "operator"); }

  SearchResult run() {
    while (!done_) step();
    return result();
  }

  SearchResult result() const {
    SearchResult r = result_;
    r.steps = step_;
    r.final_robot = robot_;
    r.final_distance = distance(center(robot_), center(cfg_.target));
    return r;
  }

 private:
  Vec2 center(Cell c) const { return cache_->spec().center(c); }

  std::mt19937_64 engine(std::uint64_t stream) const {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
  }

  void log(nlohmann::json e) {
    if (!record_) return;
    e["step"] = step_;
    result_.events.push_back(std::move(e));
  }

  void finish() {
    done_ = true;
    if (result_.entropy.size() < static_cast<std::size_t>(step_) + 1) result_.entropy.push_back(last_entropy());
  }

  double last_entropy() const { return result_.entropy.back(); }

  void refresh_entropy() {
    if (version_ != entropy_version_) {
      cached_entropy_ = entropy(belief_);
      entropy_version_ = version_;
    }
    result_.entropy.push_back(cached_entropy_);
  }

  SentenceOutcome apply_sentence(const std::string& text, const char* source) {
    SentenceOutcome out;
    try {
      out.observations = parse(text, lexicon_);
      out.ok = true;
    } catch (const ParseError& e) {
      out.error_kind = e.kind();
      out.error_message = e.what();
      out.phrase = e.phrase();
    }
    nlohmann::json ev{{"type", "sentence"}, {"source", source}, {"text", text}};
    if (out.ok) {
      out.status = update_language(belief_, out.observations, grounder_);
      ++version_;
      auto obs = nlohmann::json::array();
      for (const auto& o : out.observations) obs.push_back(to_json(o));
      ev["observations"] = obs;
      ev["degenerate"] = out.status == UpdateStatus::degenerate;
    } else {
      ev["error"] = {{"kind", out.error_kind}, {"message", out.error_message}, {"phrase", out.phrase}};
    }
    log(std::move(ev));
    return out;
  }

  void replan() {
    if (version_ == plan_version_ && plan_pos_ < plan_.size()) return;
    plan_version_ = version_;
    const Cell g = map_estimate(belief_).cell;
    if (g == goal_ && plan_pos_ < plan_.size() && plan_.back() == g) return;
    goal_ = g;
    try {
      plan_ = plan_path(cache_->free_mask(), robot_, goal_).cells;
    } catch (const PlanError&) {
      plan_ = {robot_};
    }
    plan_pos_ = 0;
    log({{"type", "plan"}, {"goal", {goal_.row, goal_.col}}, {"length", plan_.size() - 1}});
  }

  ScenarioConfig cfg_;
  std::shared_ptr<FieldCache> cache_;
  bool record_ = true;
  Grounder grounder_;
  Lexicon lexicon_;
  std::mt19937_64 detector_rng_, human_rng_;
  BeliefGrid belief_;
  Cell robot_, goal_{-1, -1};
  std::vector<Cell> plan_;
  std::size_t plan_pos_ = 0;
  std::uint64_t version_ = 0, plan_version_ = ~0ull, entropy_version_ = 0;
  double cached_entropy_ = 0;
  int step_ = 0;
  bool done_ = false;
  SearchResult result_;
};

inline std::shared_ptr<FieldCache> make_field_cache(const WorldMap& map, double resolution = 1.0,
                                                    const ExpertParams& params = ExpertParams::defaults()) {
  auto m = std::make_shared<const WorldMap>(map);
  const GridSpec spec = m->grid(resolution);
  return std::make_shared<FieldCache>(std::move(m), spec, params);
}

// Rebuilds the belief of a recorded episode from its event log alone.
inline BeliefGrid replay_belief(const ScenarioConfig& cfg, FieldCache& cache, const nlohmann::json& events,
                                Grounder grounder = {}) {
  if (!grounder) grounder = cache.grounder();
  BeliefGrid b = init_prior(cache.spec(), cache.free_mask());
  Cell robot = cfg.robot_start;
  for (const auto& e : events) {
    const std::string type = e.value("type", std::string());
    if (type == "move") {
      robot = {e.at("cell").at(0).get<int>(), e.at("cell").at(1).get<int>()};
    } else if (type == "detection" && e.value("fused", false)) {
      update_sensor(b, {cache.spec().center(robot), e.at("detected").get<bool>(), e.value("step", 0)}, cfg.sensor());
    } else if (type == "sentence" && e.contains("observations")) {
      std::vector<SpatialObservation> obs;
      for (const auto& o : e.at("observations")) obs.push_back(observation_from_json(o));
      update_language(b, obs, grounder);
    }
  }
  return b;
}

inline SearchResult run_scenario(const ScenarioConfig& cfg, std::shared_ptr<FieldCache> cache,
                                 bool record_events = true) {
  return Simulation(cfg, std::move(cache), record_events).run();
}

inline SearchResult run_scenario(const ScenarioConfig& cfg, const WorldMap& map, bool record_events = true) {
  return run_scenario(cfg, make_field_cache(map, cfg.resolution), record_events);
}

}  // namespace slg
