#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/search.hpp"

namespace slg {

class SessionError : public Error {
 public:
  SessionError(std::string kind, const std::string& what) : Error(std::move(kind), what) {}
};

// Outgoing messages for one stream subscriber. Closing wakes the reader.
class MessageQueue {
 public:
  void push(std::string m) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      q_.push_back(std::move(m));
    }
    cv_.notify_all();
  }

  // Blocks until a message arrives or the queue closes (then nullopt).
  std::optional<std::string> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !q_.empty(); });
    if (q_.empty()) return std::nullopt;
    std::string m = std::move(q_.front());
    q_.pop_front();
    return m;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> q_;
  bool closed_ = false;
};

inline nlohmann::json camera_json(const SecurityCamera& c) {
  return {{"id", c.id},
          {"position", {c.position.x, c.position.y}},
          {"heading_deg", c.heading * 180.0 / std::numbers::pi},
          {"fov_deg", c.fov * 180.0 / std::numbers::pi},
          {"range_m", c.range}};
}

inline nlohmann::json cells_json(const std::vector<Cell>& cells) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : cells) a.push_back({c.row, c.col});
  return a;
}

// One interactive search. Every operation runs on the session's own worker
// thread in submission order, so sentences and steps never interleave
// inside an update.
class Session {
 public:
  static constexpr int kStateBeliefDim = 128;
  static constexpr int kDeltaBeliefDim = 64;

  Session(std::string id, ScenarioConfig cfg, std::shared_ptr<FieldCache> cache)
      : id_(std::move(id)), cache_(cache), sim_(std::move(cfg), std::move(cache), true) {
    worker_ = std::thread([this] { work(); });
  }

  ~Session() {
    pause();
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
    std::lock_guard lock(sub_mu_);
    for (auto& s : subscribers_) s->close();
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }

  // Runs `fn` on the worker after everything queued before it.
  template <class F>
  auto enqueue(F fn) -> std::future<decltype(fn())> {
    using R = decltype(fn());
    auto task = std::make_shared<std::packaged_task<R()>>(std::move(fn));
    auto fut = task->get_future();
    {
      std::lock_guard lock(mu_);
      if (stopping_) throw SessionError("SessionClosed", "session '" + id_ + "' is closed");
      queue_.push_back([task] { (*task)(); });
    }
    cv_.notify_all();
    return fut;
  }

  nlohmann::json sentence(const std::string& text) {
    return enqueue([this, text] {
      const auto out = sim_.submit_sentence(text);
      nlohmann::json r{{"ok", out.ok}, {"text", text}};
      if (out.ok) {
        auto obs = nlohmann::json::array();
        for (const auto& o : out.observations) obs.push_back(to_json(o));
        r["observations"] = obs;
        r["degenerate"] = out.status == UpdateStatus::degenerate;
        r["entropy"] = entropy(sim_.belief());
        r["belief"] = snapshot(sim_.belief(), kStateBeliefDim);
      } else {
        r["error"] = {{"kind", out.error_kind}, {"message", out.error_message}, {"phrase", out.phrase}};
      }
      publish(false);
      return r;
    }).get();
  }

  // Advances up to `count` steps, each as its own queued operation.
  nlohmann::json step(int count = 1) {
    if (count < 1) throw ConfigError("step count must be positive");
    std::future<nlohmann::json> last;
    for (int i = 0; i < count; ++i) last = enqueue([this] { return step_now(); });
    return last.get();
  }

  nlohmann::json state() {
    return enqueue([this] { return state_now(); }).get();
  }

  nlohmann::json events() {
    return enqueue([this] { return sim_.events(); }).get();
  }

  // Steps automatically every `interval` until paused, done, or `limit` steps.
  void run(std::chrono::milliseconds interval, int limit = 0) {
    pause();
    running_ = true;
    ticker_ = std::thread([this, interval, limit] {
      int n = 0;
      while (running_ && (limit <= 0 || n < limit)) {
        nlohmann::json d;
        try {
          d = enqueue([this] { return step_now(); }).get();
        } catch (const SessionError&) {
          break;
        }
        ++n;
        if (d.value("done", false)) break;
        std::unique_lock lock(tick_mu_);
        tick_cv_.wait_for(lock, interval, [&] { return !running_.load(); });
      }
      running_ = false;
    });
  }

  void pause() {
    running_ = false;
    tick_cv_.notify_all();
    if (ticker_.joinable() && ticker_.get_id() != std::this_thread::get_id()) ticker_.join();
  }

  bool running() const { return running_; }

  // New subscribers first receive the whole event log, then live messages.
  std::shared_ptr<MessageQueue> subscribe() {
    return enqueue([this] {
      auto q = std::make_shared<MessageQueue>();
      q->push(nlohmann::json{{"type", "hello"}, {"session", id_}, {"events", sim_.events()}, {"state", state_now()}}
                  .dump());
      std::lock_guard lock(sub_mu_);
      subscribers_.push_back(q);
      return q;
    }).get();
  }

  void unsubscribe(const std::shared_ptr<MessageQueue>& q) {
    q->close();
    std::lock_guard lock(sub_mu_);
    std::erase(subscribers_, q);
  }

  // Belief rebuilt from the event log; equals the live belief bit for bit.
  BeliefGrid replay() {
    return enqueue([this] { return replay_belief(sim_.config(), *cache_, sim_.events()); }).get();
  }

  BeliefGrid belief() {
    return enqueue([this] { return sim_.belief(); }).get();
  }

 private:
  nlohmann::json step_now() {
    sim_.step();
    publish(true);
    return delta_now();
  }

  nlohmann::json delta_now() const {
    return {{"type", "delta"},
            {"step", sim_.step_count()},
            {"done", sim_.done()},
            {"success", sim_.success()},
            {"robot", {sim_.robot().row, sim_.robot().col}},
            {"goal", {sim_.goal().row, sim_.goal().col}},
            {"plan", cells_json(sim_.plan())},
            {"entropy", sim_.entropy_trace().back()},
            {"target", target_json()},
            {"belief", snapshot(sim_.belief(), kDeltaBeliefDim)}};
  }

  nlohmann::json target_json() const {
    if (!sim_.target_visible()) return nullptr;
    const Cell t = sim_.config().target;
    return {t.row, t.col};
  }

  nlohmann::json state_now() const {
    auto cams = nlohmann::json::array();
    for (const auto& c : sim_.map().cameras) cams.push_back(camera_json(c));
    return {{"session", id_},
            {"config", to_json(sim_.config())},
            {"map", map_to_json(sim_.map())},
            {"step", sim_.step_count()},
            {"done", sim_.done()},
            {"success", sim_.success()},
            {"running", running_.load()},
            {"robot", {sim_.robot().row, sim_.robot().col}},
            {"goal", {sim_.goal().row, sim_.goal().col}},
            {"plan", cells_json(sim_.plan())},
            {"cameras", cams},
            {"target", target_json()},
            {"belief", snapshot(sim_.belief(), kStateBeliefDim)},
            {"entropy", sim_.entropy_trace()},
            {"events", sim_.events()}};
  }

  // Sends events logged since the last call, then a state delta after steps.
  void publish(bool with_delta) {
    const auto& ev = sim_.events();
    std::vector<std::string> out;
    for (; published_ < ev.size(); ++published_)
      out.push_back(nlohmann::json{{"type", "event"}, {"event", ev[published_]}}.dump());
    if (with_delta) out.push_back(delta_now().dump());
    std::lock_guard lock(sub_mu_);
    for (auto& s : subscribers_)
      for (const auto& m : out) s->push(m);
  }

  void work() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      job();
    }
  }

  std::string id_;
  std::shared_ptr<FieldCache> cache_;
  Simulation sim_;
  std::size_t published_ = 0;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::thread worker_;

  std::atomic<bool> running_{false};
  std::mutex tick_mu_;
  std::condition_variable tick_cv_;
  std::thread ticker_;

  std::mutex sub_mu_;
  std::vector<std::shared_ptr<MessageQueue>> subscribers_;
};

// Owns all sessions of one service instance.
class SessionManager {
 public:
  explicit SessionManager(std::vector<WorldMap> maps, ExpertParams params = ExpertParams::defaults())
      : maps_(std::move(maps)), lookup_(cached_maps(maps_, params)) {}

  const std::vector<WorldMap>& maps() const { return maps_; }

  // Seed for session requests that do not name one.
  void set_default_seed(std::uint64_t seed) { default_seed_ = seed; }

  // Body: {"map", "mode", "seed"} plus optional scenario fields. Without
  // "robot_start"/"target" both are drawn from the seed.
  std::shared_ptr<Session> create(const nlohmann::json& body) {
    if (!body.is_object()) throw ConfigError("session request must be an object");
    nlohmann::json doc = body;
    const std::string map_id = doc.value("map", maps_.empty() ? std::string() : maps_.front().id);
    const WorldMap* map = nullptr;
    for (const auto& m : maps_)
      if (m.id == map_id) map = &m;
    if (!map) throw ConfigError("unknown map '" + map_id + "'");
    doc["map"] = map_id;
    if (!doc.contains("seed")) doc["seed"] = default_seed_;
    if (!doc.contains("robot_start") || !doc.contains("target")) {
      ScenarioConfig base;
      base.resolution = doc.value("resolution", base.resolution);
      base.detector_range = doc.value("detector_range", base.detector_range);
      const auto drawn = random_scenarios({*map}, 1, doc["seed"].get<std::uint64_t>(), base).front();
      if (!doc.contains("robot_start")) doc["robot_start"] = {drawn.robot_start.row, drawn.robot_start.col};
      if (!doc.contains("target")) doc["target"] = {drawn.target.row, drawn.target.col};
    }
    if (!doc.contains("scripted_speaker")) doc["scripted_speaker"] = false;  // the operator speaks instead
    ScenarioConfig cfg = scenario_from_json(doc);
    auto cache = lookup_(cfg.map_id, cfg.resolution);
    std::lock_guard lock(mu_);
    const std::string id = "s" + std::to_string(++counter_);
    auto s = std::make_shared<Session>(id, std::move(cfg), std::move(cache));
    sessions_[id] = s;
    return s;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw SessionError("UnknownSession", "no session '" + id + "'");
    return it->second;
  }

  void remove(const std::string& id) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(mu_);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) throw SessionError("UnknownSession", "no session '" + id + "'");
      s = std::move(it->second);
      sessions_.erase(it);
    }
  }

  std::vector<std::string> ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
  }

  void clear() {
    std::map<std::string, std::shared_ptr<Session>> old;
    std::lock_guard lock(mu_);
    old.swap(sessions_);
  }

 private:
  std::vector<WorldMap> maps_;
  std::uint64_t default_seed_ = 0;
  MapLookup lookup_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

}  // namespace slg
