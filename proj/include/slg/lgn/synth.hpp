#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "slg/dataset.hpp"
#include "slg/expert.hpp"
#include "slg/map.hpp"

namespace slg::lgn {

struct SynthOptions {
  double size = 64.0;       // square map side, meters
  double resolution = 1.0;  // locations are snapped to cell centers
  int min_landmarks = 2;
  int max_landmarks = 4;
  double min_side = 4.0;
  double max_side = 20.0;
  double gap = 3.0;         // minimum clearance between buildings
  int per_class = 10;       // stage 1: positives (and negatives) per focus and relation
  int locations = 40;       // stage 2: sampled cells per focus
  double near_share = 0.6;  // fraction of locations drawn close to the focus
  std::vector<Relation> relations{kAllRelations.begin(), kAllRelations.end()};
  ExpertParams params = ExpertParams::defaults();
  std::string prefix = "synth";
};

namespace detail {

inline bool boxes_clear(const std::array<double, 4>& a, const std::array<double, 4>& b, double gap) {
  return a[2] + gap <= b[0] || b[2] + gap <= a[0] || a[3] + gap <= b[1] || b[3] + gap <= a[1];
}

// Counter-clockwise rectangle, or an L-shape with one corner notch removed.
inline Polygon rectilinear(const std::array<double, 4>& box, std::mt19937_64& rng) {
  const double x0 = box[0], y0 = box[1], x1 = box[2], y1 = box[3];
  std::uniform_real_distribution<double> u(0.3, 0.6);
  if (std::min(x1 - x0, y1 - y0) < 8.0 || std::uniform_int_distribution<int>(0, 2)(rng) != 0)
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  const double nx = x1 - std::round((x1 - x0) * u(rng));
  const double ny = y1 - std::round((y1 - y0) * u(rng));
  return {{x0, y0}, {x1, y0}, {x1, ny}, {nx, ny}, {nx, y1}, {x0, y1}};
}

inline std::vector<Vec2> random_entrances(const Polygon& poly, std::mt19937_64& rng) {
  std::vector<std::size_t> edges;
  for (std::size_t i = 0; i < poly.size(); ++i)
    if (distance(poly[i], poly[(i + 1) % poly.size()]) >= 3.0) edges.push_back(i);
  std::shuffle(edges.begin(), edges.end(), rng);
  const int n = std::uniform_int_distribution<int>(1, std::min<int>(3, static_cast<int>(edges.size())))(rng);
  std::vector<Vec2> out;
  std::uniform_real_distribution<double> t(0.25, 0.75);
  for (int k = 0; k < n; ++k) {
    const Vec2 a = poly[edges[k]], b = poly[(edges[k] + 1) % poly.size()];
    out.push_back(a + (b - a) * t(rng));
  }
  return out;
}

// Cell center drawn either near the focus landmark or anywhere on the map.
inline Vec2 sample_location(const WorldMap& m, const Landmark& lm, const GridSpec& spec, double near_share,
                            std::mt19937_64& rng) {
  double x0 = m.width, y0 = m.height, x1 = 0, y1 = 0;
  for (const auto& v : lm.polygon) {
    x0 = std::min(x0, v.x), y0 = std::min(y0, v.y), x1 = std::max(x1, v.x), y1 = std::max(y1, v.y);
  }
  const double margin = 20.0;
  Vec2 p;
  if (std::uniform_real_distribution<double>(0, 1)(rng) < near_share) {
    p = {std::uniform_real_distribution<double>(std::max(0.0, x0 - margin), std::min(m.width, x1 + margin))(rng),
         std::uniform_real_distribution<double>(std::max(0.0, y0 - margin), std::min(m.height, y1 + margin))(rng)};
  } else {
    p = {std::uniform_real_distribution<double>(0, m.width)(rng),
         std::uniform_real_distribution<double>(0, m.height)(rng)};
  }
  Cell c = spec.locate(p);
  c.row = std::clamp(c.row, 0, spec.rows - 1);
  c.col = std::clamp(c.col, 0, spec.cols - 1);
  return spec.center(c);
}

}  // namespace detail

// Random map of non-overlapping rectilinear buildings named "Building <n>".
inline WorldMap random_map(std::mt19937_64& rng, const std::string& id, const SynthOptions& opt = {}) {
  WorldMap m;
  m.id = id;
  m.width = m.height = opt.size;
  const int n = std::uniform_int_distribution<int>(opt.min_landmarks, opt.max_landmarks)(rng);
  std::vector<std::array<double, 4>> boxes;
  std::uniform_real_distribution<double> side(opt.min_side, opt.max_side);
  for (int attempt = 0; attempt < 2000 && static_cast<int>(boxes.size()) < n; ++attempt) {
    const double w = std::round(side(rng)), h = std::round(side(rng));
    const double x = std::round(std::uniform_real_distribution<double>(2.0, opt.size - 2.0 - w)(rng));
    const double y = std::round(std::uniform_real_distribution<double>(2.0, opt.size - 2.0 - h)(rng));
    const std::array<double, 4> box{x, y, x + w, y + h};
    if (std::all_of(boxes.begin(), boxes.end(), [&](const auto& b) { return detail::boxes_clear(box, b, opt.gap); }))
      boxes.push_back(box);
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    Landmark lm;
    lm.id = "b" + std::to_string(i + 1);
    lm.name = "Building " + std::to_string(i + 1);
    lm.polygon = detail::rectilinear(boxes[i], rng);
    lm.entrances = detail::random_entrances(lm.polygon, rng);
    m.landmarks.push_back(std::move(lm));
  }
  validate(m);
  return m;
}

// Hard label: the rule value before clamping, thresholded at one half. For
// the sigmoid forms this is the tau -> 0 limit; for "around" it is the band
// |d - w| <= tau * sqrt(2 ln 2).
inline int hard_label(Relation r, Vec2 x, const Landmark& lm, const ExpertParams& params) {
  const auto& p = params[r];
  return expert_rule(r, LandmarkFrame(lm).at(x), RuleParams<double>{p.rho, p.tau, p.kappa, p.width}) >= 0.5 ? 1 : 0;
}

// Stage 1: deterministic labels, exactly balanced per (focus, relation) when
// both classes can be found.
inline Dataset synthesize_stage1(std::mt19937_64& rng, int n_maps, const SynthOptions& opt = {}) {
  Dataset ds;
  for (int i = 0; i < n_maps; ++i) {
    WorldMap m = random_map(rng, opt.prefix + "-s1-" + std::to_string(i), opt);
    const GridSpec spec = m.grid(opt.resolution);
    for (const auto& lm : m.landmarks) {
      const LandmarkFrame frame(lm);
      for (Relation r : opt.relations) {
        const auto& p = opt.params[r];
        const RuleParams<double> rp{p.rho, p.tau, p.kappa, p.width};
        int counts[2] = {0, 0};
        for (int attempt = 0; attempt < 20000 && (counts[0] < opt.per_class || counts[1] < opt.per_class);
             ++attempt) {
          const Vec2 x = detail::sample_location(m, lm, spec, attempt % 2 ? 1.0 : opt.near_share, rng);
          const int label = expert_rule(r, frame.at(x), rp) >= 0.5 ? 1 : 0;
          if (counts[label] >= opt.per_class) continue;
          ++counts[label];
          ds.points.push_back({m.id, lm.id, x, r, label, Provenance::stage1_synthetic, ""});
        }
      }
    }
    ds.add_map(std::move(m));
  }
  return ds;
}

// Stage 2: m Bernoulli labels per (location, relation) drawn from the expert
// likelihood, so the labels carry the generator's aleatoric noise.
inline Dataset synthesize_stage2(std::mt19937_64& rng, int n_maps, int m_draws, const SynthOptions& opt = {}) {
  if (m_draws < 1) throw DatasetError("samples per location must be at least 1");
  opt.params.validate();
  Dataset ds;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n_maps; ++i) {
    WorldMap m = random_map(rng, opt.prefix + "-s2-" + std::to_string(i), opt);
    const GridSpec spec = m.grid(opt.resolution);
    for (const auto& lm : m.landmarks) {
      const LandmarkFrame frame(lm);
      for (int k = 0; k < opt.locations; ++k) {
        const Vec2 x = detail::sample_location(m, lm, spec, opt.near_share, rng);
        const auto g = frame.at(x);
        for (Relation r : opt.relations) {
          const double p = expert_likelihood(r, g, opt.params[r]);
          for (int d = 0; d < m_draws; ++d)
            ds.points.push_back({m.id, lm.id, x, r, u(rng) < p ? 1 : 0, Provenance::stage2_synthetic, ""});
        }
      }
    }
    ds.add_map(std::move(m));
  }
  return ds;
}

}  // namespace slg::lgn
