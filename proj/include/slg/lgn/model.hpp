#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <tuple>
#include <type_traits>
#include <array>
#include <string>
#include <vector>

#include "slg/dataset.hpp"
#include "slg/lgn/layers.hpp"
#include "slg/map.hpp"
#include "slg/relation.hpp"

namespace slg::lgn {

struct LgnConfig {
  int channels = RasterStack::kChannels;
  int features = 16;            // F
  int map_embedding = 32;       // E_m
  int relation_embedding = 16;  // E_r
  int hidden = 32;              // head hidden width
  int roi = 5;                  // k
  int levels = 4;
  bool single_level = false;    // keep only the coarsest level

  int output_levels() const { return single_level ? 1 : levels; }
  int pooled_size() const { return features * output_levels(); }
  // Downsampling shift of output level i.
  int shift(int i) const { return single_level ? levels - 1 : i; }

  friend bool operator==(const LgnConfig&, const LgnConfig&) = default;
};

struct LgnModel {
  LgnConfig config;
  std::vector<Conv2d> bottom_up;  // stride-2, levels - 1 of them
  std::vector<Conv2d> lateral;    // 1x1, one per output level
  std::vector<Conv2d> smooth;     // 3x3, one per output level
  Dense map_encoder;
  Dense relation_encoder;
  Dense head_hidden;
  Dense head_out;

  // All-zero weights with the architecture of `cfg`.
  static LgnModel zeros(const LgnConfig& cfg) {
    if (cfg.features < 1 || cfg.levels < 1 || cfg.roi < 1 || cfg.roi % 2 == 0 || cfg.map_embedding < 1 ||
        cfg.relation_embedding < 1 || cfg.hidden < 1 || cfg.channels < 1)
      throw ModelError("InvalidArchitecture", "invalid network architecture");
    LgnModel m;
    m.config = cfg;
    const int F = cfg.features;
    for (int l = 1; l < cfg.levels; ++l) m.bottom_up.emplace_back(l == 1 ? cfg.channels : F, F, 3, 2);
    for (int i = 0; i < cfg.output_levels(); ++i) {
      const int in = cfg.shift(i) == 0 ? cfg.channels : F;
      m.lateral.emplace_back(in, F, 1, 1);
      m.smooth.emplace_back(F, F, 3, 1);
    }
    m.map_encoder = Dense(cfg.pooled_size(), cfg.map_embedding);
    m.relation_encoder = Dense(kRelationCount, cfg.relation_embedding);
    m.head_hidden = Dense(cfg.map_embedding + cfg.relation_embedding, cfg.hidden);
    m.head_out = Dense(cfg.hidden, 1);
    return m;
  }

  static LgnModel create(const LgnConfig& cfg, std::uint64_t seed) {
    LgnModel m = zeros(cfg);
    std::mt19937_64 rng(seed);
    for (auto& c : m.bottom_up) glorot(c.w, c.in * 9, c.out * 9, rng);
    for (auto& c : m.lateral) glorot(c.w, c.in, c.out, rng);
    for (auto& c : m.smooth) glorot(c.w, c.in * 9, c.out * 9, rng);
    for (Dense* d : {&m.map_encoder, &m.relation_encoder, &m.head_hidden, &m.head_out}) glorot(d->w, d->in, d->out, rng);
    return m;
  }

  // Named views of every weight array, in a fixed order shared by models of
  // the same architecture.
  template <class Self>
  static auto parameters_of(Self& self) {
    using Vec = std::conditional_t<std::is_const_v<Self>, const std::vector<double>, std::vector<double>>;
    std::vector<std::pair<std::string, Vec*>> out;
    const auto conv = [&](auto& list, const std::string& name) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        out.emplace_back(name + "." + std::to_string(i) + ".w", &list[i].w);
        out.emplace_back(name + "." + std::to_string(i) + ".b", &list[i].b);
      }
    };
    conv(self.bottom_up, "bottom_up");
    conv(self.lateral, "lateral");
    conv(self.smooth, "smooth");
    const auto dense = [&](auto& d, const std::string& name) {
      out.emplace_back(name + ".w", &d.w);
      out.emplace_back(name + ".b", &d.b);
    };
    dense(self.map_encoder, "map_encoder");
    dense(self.relation_encoder, "relation_encoder");
    dense(self.head_hidden, "head_hidden");
    dense(self.head_out, "head_out");
    return out;
  }
  auto parameters() { return parameters_of(*this); }
  auto parameters() const { return parameters_of(*this); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : parameters()) n += v->size();
    return n;
  }

  bool finite() const {
    for (const auto& [name, v] : parameters())
      for (double x : *v)
        if (!std::isfinite(x)) return false;
    return true;
  }
};

// --- input ------------------------------------------------------------------

// The five raster channels as a tensor, sdf scaled by the grid diagonal.
inline Tensor input_tensor(const RasterStack& rs) {
  const auto& s = rs.spec;
  Tensor t(RasterStack::kChannels, s.rows, s.cols);
  const double diag = std::hypot(s.rows * s.resolution, s.cols * s.resolution);
  for (int r = 0; r < s.rows; ++r)
    for (int c = 0; c < s.cols; ++c) {
      t(0, r, c) = rs.occupancy(r, c);
      t(1, r, c) = rs.focus_mask(r, c);
      t(2, r, c) = rs.entrances(r, c);
      t(3, r, c) = rs.roads(r, c);
      t(4, r, c) = rs.sdf(r, c) / diag;
    }
  return t;
}

// --- pyramid ----------------------------------------------------------------

struct PyramidCache {
  std::vector<Tensor> bottom;  // [0] is the input; [l] = tanh(bottom_up[l-1](bottom[l-1]))
  std::vector<Tensor> merged;  // lateral + upsampled coarser, per output level
  std::vector<Tensor> levels;  // smoothed outputs, finest first
};

inline PyramidCache forward_pyramid(const LgnModel& m, const Tensor& input) {
  const auto& cfg = m.config;
  const int div = 1 << (cfg.levels - 1);
  if (input.c != cfg.channels || input.h % div || input.w % div || input.h == 0 || input.w == 0)
    throw ModelError("ShapeMismatch", "raster dimensions must be positive multiples of " + std::to_string(div) +
                                          " with " + std::to_string(cfg.channels) + " channels");
  PyramidCache pc;
  pc.bottom.push_back(input);
  for (const auto& conv : m.bottom_up) {
    Tensor a = conv.forward(pc.bottom.back());
    tanh_inplace(a);
    pc.bottom.push_back(std::move(a));
  }
  const int n = cfg.output_levels();
  pc.merged.resize(n);
  pc.levels.resize(n);
  for (int i = n - 1; i >= 0; --i) {
    Tensor t = m.lateral[i].forward(pc.bottom[cfg.shift(i)]);
    if (i + 1 < n) {
      const Tensor up = upsample2(pc.merged[i + 1]);
      for (std::size_t j = 0; j < t.v.size(); ++j) t.v[j] += up.v[j];
    }
    pc.merged[i] = std::move(t);
  }
  for (int i = 0; i < n; ++i) pc.levels[i] = m.smooth[i].forward(pc.merged[i]);
  return pc;
}

// Accumulates weight gradients given dL/d(level outputs).
inline void backward_pyramid(const LgnModel& m, const PyramidCache& pc, std::vector<Tensor>& d_levels,
                             LgnModel& grad) {
  const auto& cfg = m.config;
  const int n = cfg.output_levels();
  std::vector<Tensor> d_bottom(pc.bottom.size());
  for (std::size_t l = 1; l < pc.bottom.size(); ++l)
    d_bottom[l] = Tensor(pc.bottom[l].c, pc.bottom[l].h, pc.bottom[l].w);

  Tensor carry;  // gradient flowing into merged[i] from the finer level
  for (int i = 0; i < n; ++i) {
    Tensor dm = m.smooth[i].backward(pc.merged[i], d_levels[i], grad.smooth[i]);
    if (i > 0)
      for (std::size_t j = 0; j < dm.v.size(); ++j) dm.v[j] += carry.v[j];
    const int l = cfg.shift(i);
    if (l == 0) {
      m.lateral[i].backward(pc.bottom[0], dm, grad.lateral[i], false);
    } else {
      Tensor db = m.lateral[i].backward(pc.bottom[l], dm, grad.lateral[i]);
      for (std::size_t j = 0; j < db.v.size(); ++j) d_bottom[l].v[j] += db.v[j];
    }
    if (i + 1 < n) {
      carry = Tensor(dm.c, dm.h / 2, dm.w / 2);
      upsample2_backward(dm, carry);
    }
  }
  for (int l = static_cast<int>(pc.bottom.size()) - 1; l >= 1; --l) {
    tanh_backward(pc.bottom[l], d_bottom[l]);
    const bool need_dx = l - 1 >= 1;
    Tensor dx = m.bottom_up[l - 1].backward(pc.bottom[l - 1], d_bottom[l], grad.bottom_up[l - 1], need_dx);
    if (need_dx)
      for (std::size_t j = 0; j < dx.v.size(); ++j) d_bottom[l - 1].v[j] += dx.v[j];
  }
}

struct Pyramid {
  LgnConfig config;
  std::vector<Tensor> levels;
};

inline Pyramid build_pyramid(const RasterStack& rs, const LgnModel& m) {
  return {m.config, forward_pyramid(m, input_tensor(rs)).levels};
}

// --- ROI pooling ------------------------------------------------------------

// Mean of the k x k window around `cell` (at full resolution) on every output
// level, zero padded at the borders, concatenated finest first.
inline std::vector<double> roi_pool(const std::vector<Tensor>& levels, const LgnConfig& cfg, Cell cell) {
  const int F = cfg.features, half = cfg.roi / 2;
  const double inv = 1.0 / (cfg.roi * cfg.roi);
  std::vector<double> out(static_cast<std::size_t>(F) * levels.size(), 0.0);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const Tensor& t = levels[i];
    const int s = cfg.shift(static_cast<int>(i));
    const int cy = cell.row >> s, cx = cell.col >> s;
    for (int ch = 0; ch < F; ++ch) {
      double sum = 0.0;
      for (int y = std::max(0, cy - half); y <= std::min(t.h - 1, cy + half); ++y)
        for (int x = std::max(0, cx - half); x <= std::min(t.w - 1, cx + half); ++x) sum += t(ch, y, x);
      out[i * F + ch] = sum * inv;
    }
  }
  return out;
}

inline void roi_pool_backward(const std::vector<double>& d_pooled, const LgnConfig& cfg, Cell cell,
                              std::vector<Tensor>& d_levels) {
  const int F = cfg.features, half = cfg.roi / 2;
  const double inv = 1.0 / (cfg.roi * cfg.roi);
  for (std::size_t i = 0; i < d_levels.size(); ++i) {
    Tensor& t = d_levels[i];
    const int s = cfg.shift(static_cast<int>(i));
    const int cy = cell.row >> s, cx = cell.col >> s;
    for (int ch = 0; ch < F; ++ch) {
      const double g = d_pooled[i * F + ch] * inv;
      if (g == 0.0) continue;
      for (int y = std::max(0, cy - half); y <= std::min(t.h - 1, cy + half); ++y)
        for (int x = std::max(0, cx - half); x <= std::min(t.w - 1, cx + half); ++x) t(ch, y, x) += g;
    }
  }
}

inline std::vector<double> roi_pool(const Pyramid& p, Vec2 x, const GridSpec& spec) {
  const Cell c = spec.locate(x);
  if (!spec.contains(c)) throw GridError("location outside grid");
  return roi_pool(p.levels, p.config, c);
}

// --- encoders and head ------------------------------------------------------

inline std::vector<double> one_hot(Relation r) {
  std::vector<double> v(kRelationCount, 0.0);
  v[index_of(r)] = 1.0;
  return v;
}

inline std::vector<double> encode_relation(Relation r, const LgnModel& m) {
  auto h = m.relation_encoder.forward(one_hot(r));
  for (auto& x : h) x = std::tanh(x);
  return h;
}

inline double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Intermediate activations of one query, kept for the backward pass.
struct HeadTrace {
  std::vector<double> pooled, map_emb, rel_emb, joint, hidden;
  double logit = 0.0;
};

inline HeadTrace head_forward(const LgnModel& m, std::vector<double> pooled, const std::vector<double>& rel_emb) {
  HeadTrace t;
  t.pooled = std::move(pooled);
  t.map_emb = m.map_encoder.forward(t.pooled);
  for (auto& x : t.map_emb) x = std::tanh(x);
  t.rel_emb = rel_emb;
  t.joint = t.map_emb;
  t.joint.insert(t.joint.end(), rel_emb.begin(), rel_emb.end());
  t.hidden = m.head_hidden.forward(t.joint);
  for (auto& x : t.hidden) x = std::tanh(x);
  t.logit = m.head_out.forward(t.hidden)[0];
  return t;
}

// Backward from dL/dlogit; returns dL/dpooled and accumulates the relation
// encoder gradient for relation r.
inline std::vector<double> head_backward(const LgnModel& m, const HeadTrace& t, Relation r, double d_logit,
                                         LgnModel& grad) {
  auto d_hidden = m.head_out.backward(t.hidden, {d_logit}, grad.head_out);
  for (std::size_t i = 0; i < d_hidden.size(); ++i) d_hidden[i] *= 1.0 - t.hidden[i] * t.hidden[i];
  auto d_joint = m.head_hidden.backward(t.joint, d_hidden, grad.head_hidden);
  const std::size_t em = t.map_emb.size();
  std::vector<double> d_map(d_joint.begin(), d_joint.begin() + static_cast<std::ptrdiff_t>(em));
  std::vector<double> d_rel(d_joint.begin() + static_cast<std::ptrdiff_t>(em), d_joint.end());
  for (std::size_t i = 0; i < em; ++i) d_map[i] *= 1.0 - t.map_emb[i] * t.map_emb[i];
  for (std::size_t i = 0; i < d_rel.size(); ++i) d_rel[i] *= 1.0 - t.rel_emb[i] * t.rel_emb[i];
  m.relation_encoder.backward(one_hot(r), d_rel, grad.relation_encoder);
  return m.map_encoder.backward(t.pooled, d_map, grad.map_encoder);
}

// p-hat for one query against a precomputed pyramid.
inline double predict(const LgnModel& m, const Pyramid& p, Cell cell, Relation r) {
  return logistic(head_forward(m, roi_pool(p.levels, m.config, cell), encode_relation(r, m)).logit);
}

inline double predict(const LgnModel& m, const RasterStack& rs, Vec2 x, Relation r) {
  const Cell c = rs.spec.locate(x);
  if (!rs.spec.contains(c)) throw GridError("location outside grid");
  return predict(m, build_pyramid(rs, m), c, r);
}

inline double nll(double p, int label) { return -(label ? std::log(p) : std::log1p(-p)); }

// --- batches ----------------------------------------------------------------

// Label counts for one (cell, relation) query on a raster. Repeated
// annotations of the same query are merged into counts.
struct Query {
  Cell cell;
  Relation relation = Relation::near;
  double positives = 0.0;
  double negatives = 0.0;
};

struct RasterExample {
  std::string map_id;
  std::string landmark_id;
  Tensor input;
  GridSpec spec;
  std::vector<Query> queries;

  double weight() const {
    double w = 0.0;
    for (const auto& q : queries) w += q.positives + q.negatives;
    return w;
  }
};

// Groups points by (map, focus landmark), rasterizes each group once on the
// map's grid at `resolution`, and merges repeated queries.
inline std::vector<RasterExample> make_examples(const Dataset& data, double resolution = 1.0) {
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<RasterExample> out;
  std::vector<std::map<std::tuple<int, int, int>, std::size_t>> qindex;
  for (const auto& p : data.points) {
    const auto key = std::make_pair(p.map_id, p.landmark_id);
    auto it = index.find(key);
    if (it == index.end()) {
      const WorldMap& m = data.map_of(p);
      const GridSpec spec = m.grid(resolution);
      RasterExample ex{p.map_id, p.landmark_id, input_tensor(rasterize(m, p.landmark_id, spec)), spec, {}};
      it = index.emplace(key, out.size()).first;
      out.push_back(std::move(ex));
      qindex.emplace_back();
    }
    RasterExample& ex = out[it->second];
    const Cell c = ex.spec.locate(p.location);
    if (!ex.spec.contains(c)) throw DatasetError("point outside the grid of map '" + p.map_id + "'");
    const auto qkey = std::make_tuple(c.row, c.col, index_of(p.relation));
    auto& qi = qindex[it->second];
    auto qit = qi.find(qkey);
    if (qit == qi.end()) {
      qit = qi.emplace(qkey, ex.queries.size()).first;
      ex.queries.push_back({c, p.relation, 0.0, 0.0});
    }
    (p.label ? ex.queries[qit->second].positives : ex.queries[qit->second].negatives) += 1.0;
  }
  return out;
}

// --- loss and gradients -----------------------------------------------------

// Summed NLL of one example's queries under logit z.
inline double query_loss(const Query& q, double z) { return q.positives * softplus(-z) + q.negatives * softplus(z); }

// Mean NLL over all labels in `batch`.
inline double mean_nll(const LgnModel& m, std::span<const RasterExample> batch) {
  std::array<std::vector<double>, kRelationCount> rel;
  for (Relation r : kAllRelations) rel[index_of(r)] = encode_relation(r, m);
  double total = 0.0, weight = 0.0;
  for (const auto& ex : batch) {
    const auto pc = forward_pyramid(m, ex.input);
    for (const auto& q : ex.queries) {
      const auto t = head_forward(m, roi_pool(pc.levels, m.config, q.cell), rel[index_of(q.relation)]);
      total += query_loss(q, t.logit);
      weight += q.positives + q.negatives;
    }
  }
  if (weight == 0.0) throw DatasetError("empty batch");
  return total / weight;
}

// Exact gradient of the mean NLL over `batch`. Rasters are processed in
// order and queries in order within each raster, so the summation order is
// fixed. Throws ModelError("NaNGradient") naming the first non-finite array.
inline LgnModel gradients(const LgnModel& m, std::span<const RasterExample> batch, double* loss = nullptr) {
  double weight = 0.0;
  for (const auto& ex : batch) weight += ex.weight();
  if (weight == 0.0) throw DatasetError("empty batch");
  LgnModel g = LgnModel::zeros(m.config);
  std::array<std::vector<double>, kRelationCount> rel;
  for (Relation r : kAllRelations) rel[index_of(r)] = encode_relation(r, m);
  double total = 0.0;
  for (const auto& ex : batch) {
    const auto pc = forward_pyramid(m, ex.input);
    std::vector<Tensor> d_levels;
    for (const auto& t : pc.levels) d_levels.emplace_back(t.c, t.h, t.w);
    for (const auto& q : ex.queries) {
      const auto t = head_forward(m, roi_pool(pc.levels, m.config, q.cell), rel[index_of(q.relation)]);
      total += query_loss(q, t.logit);
      const double n = q.positives + q.negatives;
      const double d_logit = (n * logistic(t.logit) - q.positives) / weight;
      const auto d_pooled = head_backward(m, t, q.relation, d_logit, g);
      roi_pool_backward(d_pooled, m.config, q.cell, d_levels);
    }
    backward_pyramid(m, pc, d_levels, g);
  }
  for (const auto& [name, v] : g.parameters())
    for (double x : *v)
      if (!std::isfinite(x)) throw ModelError("NaNGradient", "non-finite gradient in '" + name + "'");
  if (loss) *loss = total / weight;
  return g;
}

}  // namespace slg::lgn
