#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/search/sim.hpp"
#include "slg/stats.hpp"

namespace slg {

// Fraction of scenarios that succeeded within each step limit 1..cap.
inline std::vector<double> success_curve(const std::vector<SearchResult>& rs, int cap) {
  std::vector<double> hits(static_cast<std::size_t>(cap) + 1, 0.0);
  for (const auto& r : rs)
    if (r.success && r.steps <= cap) hits[r.steps] += 1.0;
  std::vector<double> curve(static_cast<std::size_t>(cap), 0.0);
  double acc = 0;
  for (int l = 1; l <= cap; ++l) {
    acc += hits[l];
    curve[l - 1] = rs.empty() ? 0.0 : acc / static_cast<double>(rs.size());
  }
  return curve;
}

// Step counts with failures counted at the scenario cap.
inline std::vector<double> capped_steps(const std::vector<SearchResult>& rs, const std::vector<int>& caps) {
  std::vector<double> v;
  for (std::size_t i = 0; i < rs.size(); ++i) v.push_back(rs[i].success ? rs[i].steps : caps[i]);
  return v;
}

struct ModeSummary {
  SearchMode mode;
  std::vector<SearchResult> results;
  std::vector<double> steps;  // capped
  std::vector<double> curve;  // index l-1 = limit l
  double mean = 0;
  double sd = 0;
  double success_rate = 0;
};

struct ModeComparison {
  SearchMode a;
  SearchMode b;
  double mean_difference = 0;  // a - b
  TTest test;
};

struct BatchReport {
  int cap = 0;
  std::size_t scenarios = 0;
  std::vector<ModeSummary> modes;
  std::vector<ModeComparison> comparisons;

  const ModeSummary& of(SearchMode m) const {
    for (const auto& s : modes)
      if (s.mode == m) return s;
    throw ConfigError("mode not part of this batch");
  }

  const ModeComparison& compare(SearchMode a, SearchMode b) const {
    for (const auto& c : comparisons)
      if (c.a == a && c.b == b) return c;
    throw ConfigError("comparison not part of this batch");
  }

  // True when mode `m`'s curve is at least every other mode's at every limit.
  bool dominates(SearchMode m) const {
    const auto& top = of(m).curve;
    for (const auto& s : modes)
      for (std::size_t i = 0; i < top.size(); ++i)
        if (s.curve[i] > top[i]) return false;
    return true;
  }
};

using MapLookup = std::function<std::shared_ptr<FieldCache>(const std::string& map_id, double resolution)>;

// Memoizing lookup over a fixed set of maps.
inline MapLookup cached_maps(const std::vector<WorldMap>& maps, ExpertParams params = ExpertParams::defaults()) {
  auto store = std::make_shared<std::map<std::pair<std::string, double>, std::shared_ptr<FieldCache>>>();
  auto mu = std::make_shared<std::mutex>();
  return [maps, params, store, mu](const std::string& id, double res) {
    std::lock_guard lock(*mu);
    auto key = std::make_pair(id, res);
    if (auto it = store->find(key); it != store->end()) return it->second;
    for (const auto& m : maps)
      if (m.id == id) return (*store)[key] = make_field_cache(m, res, params);
    throw ConfigError("scenario refers to unknown map '" + id + "'");
  };
}

// Runs every scenario in every mode (the scenario's own mode is ignored).
// Scenarios are independent and may run on several threads; results are
// stored by index, so the report does not depend on the thread count.
inline BatchReport run_batch(const std::vector<ScenarioConfig>& cfgs, const std::vector<SearchMode>& modes,
                             const MapLookup& lookup, unsigned threads = 1) {
  if (cfgs.size() < 2) throw ConfigError("a batch needs at least two scenarios");
  if (modes.empty()) throw ConfigError("a batch needs at least one mode");
  BatchReport rep;
  rep.scenarios = cfgs.size();
  std::vector<int> caps;
  for (const auto& c : cfgs) {
    c.validate();
    caps.push_back(c.max_steps);
    rep.cap = std::max(rep.cap, c.max_steps);
  }
  std::vector<std::vector<SearchResult>> results(modes.size(), std::vector<SearchResult>(cfgs.size()));
  const std::size_t jobs = modes.size() * cfgs.size();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex fail_mu;
  const auto worker = [&] {
    for (std::size_t j; (j = next++) < jobs;) {
      try {
        ScenarioConfig c = cfgs[j % cfgs.size()];
        c.mode = modes[j / cfgs.size()];
        results[j / cfgs.size()][j % cfgs.size()] = run_scenario(c, lookup(c.map_id, c.resolution), false);
      } catch (...) {
        std::lock_guard lock(fail_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t m = 0; m < modes.size(); ++m) {
    ModeSummary s;
    s.mode = modes[m];
    s.results = std::move(results[m]);
    s.steps = capped_steps(s.results, caps);
    s.curve = success_curve(s.results, rep.cap);
    s.mean = mean_of(s.steps);
    s.sd = sd_of(s.steps);
    s.success_rate = static_cast<double>(std::count_if(s.results.begin(), s.results.end(),
                                                       [](const SearchResult& r) { return r.success; })) /
                     static_cast<double>(s.results.size());
    rep.modes.push_back(std::move(s));
  }
  for (const auto& a : rep.modes)
    for (const auto& b : rep.modes)
      if (a.mode != b.mode) rep.comparisons.push_back({a.mode, b.mode, a.mean - b.mean, welch_t_test(a.steps, b.steps)});
  return rep;
}

// Random start/target pairs on free cells, the target beyond detector range
// of the start and reachable from it. Maps are used round-robin.
inline std::vector<ScenarioConfig> random_scenarios(const std::vector<WorldMap>& maps, std::size_t n,
                                                    std::uint64_t seed, const ScenarioConfig& base = {}) {
  if (maps.empty()) throw ConfigError("no maps to draw scenarios on");
  std::vector<ScenarioConfig> out;
  std::vector<Grid<unsigned char>> frees;
  for (const auto& m : maps) frees.push_back(free_mask(m, m.grid(base.resolution)));
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % maps.size();
    const GridSpec spec = maps[k].grid(base.resolution);
    std::uniform_int_distribution<int> row(0, spec.rows - 1), col(0, spec.cols - 1);
    ScenarioConfig c = base;
    c.map_id = maps[k].id;
    c.seed = rng();
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw ConfigError("could not place a scenario on map '" + maps[k].id + "'");
      const Cell s{row(rng), col(rng)}, t{row(rng), col(rng)};
      if (!frees[k](s.row, s.col) || !frees[k](t.row, t.col)) continue;
      if (distance(spec.center(s), spec.center(t)) <= base.detector_range) continue;
      try {
        plan_path(frees[k], s, t);
      } catch (const PlanError&) {
        continue;
      }
      c.robot_start = s;
      c.target = t;
      break;
    }
    out.push_back(c);
  }
  return out;
}

inline nlohmann::json to_json(const BatchReport& r, int curve_stride = 1) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& s : r.modes) {
    nlohmann::json curve = nlohmann::json::array();
    for (int l = curve_stride; l <= r.cap; l += curve_stride) curve.push_back({l, s.curve[l - 1]});
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& res : s.results) steps.push_back({{"success", res.success}, {"steps", res.steps}});
    modes.push_back({{"mode", name_of(s.mode)},
                     {"mean_steps", s.mean},
                     {"sd_steps", s.sd},
                     {"success_rate", s.success_rate},
                     {"scenarios", steps},
                     {"curve", curve}});
  }
  nlohmann::json cmp = nlohmann::json::array();
  for (const auto& c : r.comparisons)
    cmp.push_back({{"a", name_of(c.a)}, {"b", name_of(c.b)}, {"mean_difference", c.mean_difference},
                   {"t", c.test.t}, {"df", c.test.df}, {"p", c.test.p}});
  return {{"cap", r.cap}, {"scenarios", r.scenarios}, {"modes", modes}, {"comparisons", cmp}};
}

// Aggregate table as tab-separated text.
inline std::string summary_table(const BatchReport& r) {
  std::ostringstream o;
  o << "mode\tmean_steps\tsd_steps\tsuccess_rate\n";
  for (const auto& s : r.modes) o << name_of(s.mode) << '\t' << s.mean << '\t' << s.sd << '\t' << s.success_rate << '\n';
  return o.str();
}

// (step_limit, success_fraction) pairs, one mode per column.
inline std::string curve_table(const BatchReport& r) {
  std::ostringstream o;
  o << "step_limit";
  for (const auto& s : r.modes) o << '\t' << name_of(s.mode);
  o << '\n';
  for (int l = 1; l <= r.cap; ++l) {
    o << l;
    for (const auto& s : r.modes) o << '\t' << s.curve[l - 1];
    o << '\n';
  }
  return o.str();
}

}  // namespace slg
