#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/dataset.hpp"
#include "slg/expert.hpp"
#include "slg/lgn.hpp"
#include "slg/stats.hpp"

namespace slg {

// --- splits and augmentation --------------------------------------------------

struct Split {
  Dataset train;
  Dataset test;
};

// Region ids (map ids) referenced by the points, sorted.
inline std::vector<std::string> regions_of(const Dataset& d) {
  std::set<std::string> ids;
  for (const auto& p : d.points) ids.insert(p.map_id);
  return {ids.begin(), ids.end()};
}

// Region-level split with a 3:2 train:test ratio over shuffled regions.
inline Split split_by_region(const Dataset& d, std::uint64_t seed) {
  auto regions = regions_of(d);
  if (regions.size() < 2) throw DatasetError("a region split needs at least two regions");
  std::mt19937_64 rng(seed);
  std::shuffle(regions.begin(), regions.end(), rng);
  const std::size_t n = regions.size();
  const std::size_t n_train = std::clamp<std::size_t>((3 * n + 2) / 5, 1, n - 1);
  const std::set<std::string> train_ids(regions.begin(), regions.begin() + static_cast<std::ptrdiff_t>(n_train));
  Split s;
  for (const auto& [id, m] : d.maps) (train_ids.count(id) ? s.train : s.test).add_map(m);
  for (const auto& p : d.points) (train_ids.count(p.map_id) ? s.train : s.test).points.push_back(p);
  return s;
}

// Adds a jointly transformed copy of every map and point per transform.
// The identity, if listed, keeps the original ids.
inline Dataset augment(const Dataset& d, const std::vector<Dihedral>& transforms = Dihedral::all()) {
  Dataset out;
  for (const auto& t : transforms) {
    for (const auto& [id, m] : d.maps) out.add_map(transformed(m, t));
    for (auto p : d.points) {
      const WorldMap& m = d.map_of(p);
      p.location = t.apply(p.location, m.width, m.height);
      p.map_id += t.suffix();
      out.points.push_back(std::move(p));
    }
  }
  return out;
}

// --- grounding models ---------------------------------------------------------

// Predicted probability for every point of a dataset, in order.
using Predictor = std::function<std::vector<double>(const Dataset&)>;

inline Predictor chance_predictor(std::uint64_t seed) {
  return [seed](const Dataset& d) {
    ChanceLikelihood draw(seed);
    std::vector<double> out;
    out.reserve(d.points.size());
    for (std::size_t i = 0; i < d.points.size(); ++i) out.push_back(draw());
    return out;
  };
}

// The rule family evaluated at each point.
inline Predictor expert_predictor(ExpertParams params) {
  params.validate();
  return [params](const Dataset& d) {
    std::vector<double> out;
    out.reserve(d.points.size());
    for (const auto& p : d.points) {
      const WorldMap& m = d.map_of(p);
      out.push_back(expert_likelihood(p.relation, p.location, m.at(p.landmark_id), m, params));
    }
    return out;
  };
}

// One pyramid per (map, landmark) raster; works for any pyramid depth,
// including the single-level variant.
inline Predictor lgn_predictor(const lgn::LgnModel& model, double resolution = 1.0) {
  return [model, resolution](const Dataset& d) {
    std::map<std::pair<std::string, std::string>, lgn::Pyramid> pyramids;
    std::array<std::vector<double>, kRelationCount> rel;
    for (Relation r : kAllRelations) rel[index_of(r)] = lgn::encode_relation(r, model);
    std::vector<double> out;
    out.reserve(d.points.size());
    for (const auto& p : d.points) {
      const WorldMap& m = d.map_of(p);
      const GridSpec spec = m.grid(resolution);
      const Cell c = spec.locate(p.location);
      if (!spec.contains(c)) throw DatasetError("point outside the grid of map '" + p.map_id + "'");
      const auto key = std::make_pair(p.map_id, p.landmark_id);
      auto it = pyramids.find(key);
      if (it == pyramids.end())
        it = pyramids.emplace(key, lgn::build_pyramid(rasterize(m, p.landmark_id, spec), model)).first;
      const auto t = lgn::head_forward(model, lgn::roi_pool(it->second.levels, model.config, c), rel[index_of(p.relation)]);
      out.push_back(lgn::logistic(t.logit));
    }
    return out;
  };
}

// --- NLL statistics -----------------------------------------------------------

inline constexpr int kHistogramBins = 40;
inline constexpr double kHistogramWidth = 0.05;

struct NllStats {
  std::size_t n = 0;
  double mean = 0;
  double sd = 0;
};

struct NllReport {
  NllStats overall;
  std::array<std::size_t, kHistogramBins> bins{};  // [k * 0.05, (k + 1) * 0.05), last bin closed
  std::size_t overflow = 0;                        // NLL > 2
  std::map<Relation, NllStats> per_relation;
  std::vector<double> values;                      // per point, dataset order
};

inline NllStats stats_of(const std::vector<double>& v) { return {v.size(), mean_of(v), sd_of(v)}; }

inline std::vector<double> per_point_nll(const Predictor& model, const Dataset& d) {
  const auto p = model(d);
  if (p.size() != d.points.size()) throw ModelError("PredictionCount", "model returned the wrong number of predictions");
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = lgn::nll(p[i], d.points[i].label);
  return out;
}

inline NllReport summarize_nll(std::vector<double> values, const std::vector<Relation>& relations) {
  if (values.empty()) throw DatasetError("NLL evaluation needs a non-empty test set");
  NllReport r;
  r.overall = stats_of(values);
  std::map<Relation, std::vector<double>> by_rel;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (v > 2.0) {
      ++r.overflow;
    } else {
      const int k = std::min(kHistogramBins - 1, static_cast<int>(v / kHistogramWidth));
      ++r.bins[static_cast<std::size_t>(std::max(0, k))];
    }
    if (i < relations.size()) by_rel[relations[i]].push_back(v);
  }
  for (const auto& [rel, v] : by_rel) r.per_relation[rel] = stats_of(v);
  r.values = std::move(values);
  return r;
}

inline NllReport eval_nll(const Predictor& model, const Dataset& test) {
  if (test.points.empty()) throw DatasetError("NLL evaluation needs a non-empty test set");
  std::vector<Relation> rels;
  for (const auto& p : test.points) rels.push_back(p.relation);
  return summarize_nll(per_point_nll(model, test), rels);
}

// --- model comparison ---------------------------------------------------------

struct PairwiseComparison {
  std::string a;
  std::string b;
  double mean_difference = 0;  // mean NLL of a minus b
  TTest test;
};

// Paired tests for every ordered pair of named per-point NLL vectors.
inline std::vector<PairwiseComparison> compare(const std::vector<std::pair<std::string, std::vector<double>>>& models) {
  for (const auto& m : models)
    if (m.second.size() != models.front().second.size())
      throw ConfigError("models were evaluated on different numbers of points");
  std::vector<PairwiseComparison> out;
  for (const auto& [na, va] : models)
    for (const auto& [nb, vb] : models)
      if (na != nb) {
        std::vector<double> d(va.size());
        for (std::size_t i = 0; i < va.size(); ++i) d[i] = va[i] - vb[i];
        out.push_back({na, nb, mean_of(d), paired_t_test(va, vb)});
      }
  return out;
}

// --- exports ------------------------------------------------------------------

inline nlohmann::json to_json(const NllStats& s) { return {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}}; }

inline nlohmann::json to_json(const NllReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [rel, s] : r.per_relation) per[std::string(name_of(rel))] = to_json(s);
  return {{"n", r.overall.n},
          {"mean", r.overall.mean},
          {"sd", r.overall.sd},
          {"bin_width", kHistogramWidth},
          {"histogram", r.bins},
          {"overflow", r.overflow},
          {"per_relation", per}};
}

// Tab-separated histogram with a trailing overflow row.
inline std::string histogram_table(const NllReport& r) {
  std::ostringstream o;
  o << "bin_low\tbin_high\tcount\n";
  for (int k = 0; k < kHistogramBins; ++k)
    o << k * kHistogramWidth << '\t' << (k + 1) * kHistogramWidth << '\t' << r.bins[k] << '\n';
  o << "overflow\t\t" << r.overflow << '\n';
  return o.str();
}

inline std::string summary_table(const NllReport& r) {
  std::ostringstream o;
  o << "relation\tn\tmean_nll\tsd_nll\n";
  o << "all\t" << r.overall.n << '\t' << r.overall.mean << '\t' << r.overall.sd << '\n';
  for (const auto& [rel, s] : r.per_relation) o << name_of(rel) << '\t' << s.n << '\t' << s.mean << '\t' << s.sd << '\n';
  return o.str();
}

inline std::string comparison_table(const std::vector<PairwiseComparison>& cs) {
  std::ostringstream o;
  o << "model_a\tmodel_b\tmean_difference\tt\tp\n";
  for (const auto& c : cs) o << c.a << '\t' << c.b << '\t' << c.mean_difference << '\t' << c.test.t << '\t' << c.test.p << '\n';
  return o.str();
}

}  // namespace slg
