#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/error.hpp"
#include "slg/expert.hpp"
#include "slg/grid.hpp"
#include "slg/map.hpp"
#include "slg/parser.hpp"

namespace slg {

// Posterior over the target cell. The state is kept as unnormalized log
// weights (max shifted to 0) so long runs never underflow; `mass` is the
// normalized view refreshed after every operation. Occupied cells carry
// weight -inf and mass 0.
class BeliefGrid {
 public:
  BeliefGrid() = default;
  BeliefGrid(GridSpec spec, Grid<unsigned char> free) : spec_(spec), free_(std::move(free)) {
    logw_ = Grid<double>(spec.rows, spec.cols, -std::numeric_limits<double>::infinity());
    mass_ = Grid<double>(spec.rows, spec.cols, 0.0);
  }

  const GridSpec& spec() const { return spec_; }
  const Grid<unsigned char>& free() const { return free_; }
  const Grid<double>& mass() const { return mass_; }
  const Grid<double>& log_weights() const { return logw_; }
  double operator[](std::size_t i) const { return mass_[i]; }
  std::size_t size() const { return mass_.size(); }

  // Replaces the state with the given log weights (non-free cells ignored).
  void assign_log(const Grid<double>& logw) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logw_.size(); ++i)
      if (free_[i]) mx = std::max(mx, logw[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < logw_.size(); ++i) {
      logw_[i] = free_[i] ? logw[i] - mx : -std::numeric_limits<double>::infinity();
      z += free_[i] ? std::exp(logw_[i]) : 0.0;
    }
    for (std::size_t i = 0; i < mass_.size(); ++i) mass_[i] = free_[i] ? std::exp(logw_[i]) / z : 0.0;
  }

  friend bool operator==(const BeliefGrid& a, const BeliefGrid& b) {
    return a.spec_ == b.spec_ && a.free_ == b.free_ && a.logw_ == b.logw_;
  }

 private:
  GridSpec spec_;
  Grid<unsigned char> free_;
  Grid<double> logw_;
  Grid<double> mass_;
};

enum class UpdateStatus { ok, degenerate };

inline BeliefGrid init_prior(const GridSpec& spec, Grid<unsigned char> free) {
  if (free.rows() != spec.rows || free.cols() != spec.cols) throw GridError("free mask does not match grid");
  if (std::none_of(free.values().begin(), free.values().end(), [](unsigned char f) { return f != 0; }))
    throw GridError("no free cells for the prior");
  BeliefGrid b(spec, std::move(free));
  b.assign_log(Grid<double>(spec.rows, spec.cols, 0.0));
  return b;
}

// Uniform over free cells (outside every landmark).
inline BeliefGrid init_prior(const GridSpec& spec, const WorldMap& map) { return init_prior(spec, free_mask(map, spec)); }

// Multiplies the belief by a non-negative likelihood grid and renormalizes in
// one step. A likelihood that vanishes on every free cell (or is not finite)
// leaves the belief untouched and reports `degenerate`.
inline UpdateStatus update(BeliefGrid& b, const Grid<double>& likelihood) {
  const auto& s = b.spec();
  if (likelihood.rows() != s.rows || likelihood.cols() != s.cols)
    throw GridError("likelihood field dimensions do not match the belief");
  Grid<double> next = b.log_weights();
  bool any = false;
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (!b.free()[i]) continue;
    const double l = likelihood[i];
    if (!(l >= 0.0) || !std::isfinite(l)) return UpdateStatus::degenerate;
    next[i] += std::log(l);
    any = any || std::isfinite(next[i]);
  }
  if (!any) return UpdateStatus::degenerate;
  b.assign_log(next);
  return UpdateStatus::ok;
}

// --- prediction ---------------------------------------------------------------

// Row-stochastic transition kernel in sparse form: rows[i] lists (j, p(j | i)).
struct TransitionKernel {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;

  static TransitionKernel identity(std::size_t n) {
    TransitionKernel k;
    k.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) k.rows[i] = {{i, 1.0}};
    return k;
  }

  static TransitionKernel uniform(std::size_t n) {
    TransitionKernel k;
    k.rows.assign(n, {});
    for (auto& r : k.rows)
      for (std::size_t j = 0; j < n; ++j) r.emplace_back(j, 1.0 / static_cast<double>(n));
    return k;
  }

  void validate(std::size_t n) const {
    if (rows.size() != n) throw GridError("transition kernel size does not match the belief");
    for (const auto& r : rows) {
      double s = 0.0;
      for (const auto& [j, p] : r) {
        if (j >= n || !(p >= 0.0)) throw GridError("transition kernel has an invalid entry");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) throw GridError("transition kernel rows must sum to 1");
    }
  }
};

// Chapman-Kolmogorov step: mass' = K^T mass. Mass moved onto occupied cells
// is dropped before renormalizing.
inline UpdateStatus predict(BeliefGrid& b, const TransitionKernel& k) {
  k.validate(b.size());
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  // Online log-sum-exp per destination cell, so tiny weights survive.
  std::vector<double> mx(b.size(), kNegInf), acc(b.size(), 0.0);
  const auto& lw = b.log_weights();
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.free()[i] || lw[i] == kNegInf) continue;
    for (const auto& [j, p] : k.rows[i]) {
      if (p == 0.0) continue;
      const double t = lw[i] + std::log(p);
      if (t > mx[j]) {
        acc[j] = acc[j] * std::exp(mx[j] - t) + 1.0;
        mx[j] = t;
      } else {
        acc[j] += std::exp(t - mx[j]);
      }
    }
  }
  Grid<double> logw(b.spec().rows, b.spec().cols);
  bool any = false;
  for (std::size_t j = 0; j < b.size(); ++j) {
    logw[j] = mx[j] == kNegInf ? kNegInf : mx[j] + std::log(acc[j]);
    any = any || (b.free()[j] && logw[j] > kNegInf);
  }
  if (!any) return UpdateStatus::degenerate;
  b.assign_log(logw);
  return UpdateStatus::ok;
}

// --- sensor measurements ------------------------------------------------------

struct SensorModel {
  double true_positive = 0.8;
  double true_negative = 0.8;
  double range = 25.0;  // meters, omnidirectional

  void validate() const {
    if (!(true_positive > 0 && true_positive < 1) || !(true_negative > 0 && true_negative < 1) || !(range > 0))
      throw ConfigError("invalid sensor model");
  }
};

struct SensorObservation {
  Vec2 robot;
  bool detected = false;
  int step = 0;
};

// p(z | target at each cell center).
inline Grid<double> sensor_likelihood(const GridSpec& spec, const SensorObservation& z, const SensorModel& s) {
  Grid<double> lik(spec.rows, spec.cols);
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c) {
      const bool in_range = distance(spec.center({r, c}), z.robot) <= s.range;
      lik(r, c) = z.detected ? (in_range ? s.true_positive : 1.0 - s.true_negative)
                             : (in_range ? 1.0 - s.true_positive : s.true_negative);
    }
  return lik;
}

inline UpdateStatus update_sensor(BeliefGrid& b, const SensorObservation& z, const SensorModel& s = {}) {
  s.validate();
  return update(b, sensor_likelihood(b.spec(), z, s));
}

// --- language measurements ----------------------------------------------------

using Grounder = std::function<LikelihoodField(Relation, const std::string& landmark_id)>;

// Grounds one observation; a negated observation uses 1 - f pointwise.
inline Grid<double> language_likelihood(const SpatialObservation& obs, const Grounder& grounder) {
  LikelihoodField f = grounder(obs.relation, obs.landmark_id);
  if (obs.negated)
    for (auto& v : f.values.values()) v = 1.0 - v;
  return std::move(f.values);
}

inline UpdateStatus update_language(BeliefGrid& b, const SpatialObservation& obs, const Grounder& grounder) {
  return update(b, language_likelihood(obs, grounder));
}

// Applies the factors of a multi-relation utterance one after another.
inline UpdateStatus update_language(BeliefGrid& b, const std::vector<SpatialObservation>& obs,
                                    const Grounder& grounder) {
  UpdateStatus st = UpdateStatus::ok;
  for (const auto& o : obs)
    if (update_language(b, o, grounder) == UpdateStatus::degenerate) st = UpdateStatus::degenerate;
  return st;
}

// Grounder over the expert rule family on a fixed grid.
inline Grounder expert_grounder(const WorldMap& map, const GridSpec& spec, ExpertParams params) {
  return [&map, spec, params](Relation r, const std::string& id) { return ground_field(r, id, map, spec, params); };
}

// --- queries ------------------------------------------------------------------

struct MapEstimate {
  std::size_t index = 0;
  Cell cell;
  Vec2 location;
};

// Highest-mass free cell; ties go to the lowest row-major index.
inline MapEstimate map_estimate(const BeliefGrid& b) {
  const auto& lw = b.log_weights();
  std::size_t best = lw.size();
  for (std::size_t i = 0; i < lw.size(); ++i)
    if (b.free()[i] && (best == lw.size() || lw[i] > lw[best])) best = i;
  if (best == lw.size()) best = 0;
  const Cell c = b.spec().cell(best);
  return {best, c, b.spec().center(c)};
}

inline double entropy(const BeliefGrid& b) {
  double h = 0.0;
  for (double m : b.mass().values())
    if (m > 0.0) h -= m * std::log(m);
  return h;
}

// Block-summed mass so neither dimension exceeds `max_dim`.
inline Grid<double> downsample(const BeliefGrid& b, int max_dim, int* factor_out = nullptr) {
  const auto& s = b.spec();
  int f = 1;
  while ((s.rows + f - 1) / f > max_dim || (s.cols + f - 1) / f > max_dim) ++f;
  Grid<double> out((s.rows + f - 1) / f, (s.cols + f - 1) / f, 0.0);
  for (int r = 0; r < s.rows; ++r)
    for (int c = 0; c < s.cols; ++c) out(r / f, c / f) += b.mass()(r, c);
  if (factor_out) *factor_out = f;
  return out;
}

// Snapshot: grid dimensions plus row-major mass, optionally downsampled.
// The MAP cell is always reported at full resolution.
inline nlohmann::json snapshot(const BeliefGrid& b, int max_dim = 0) {
  const auto& s = b.spec();
  int f = 1;
  Grid<double> m = max_dim > 0 ? downsample(b, max_dim, &f) : b.mass();
  const auto est = map_estimate(b);
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"resolution", s.resolution * f},
          {"origin", {s.origin.x, s.origin.y}},
          {"downsample", f},
          {"mass", std::vector<double>(m.values().begin(), m.values().end())},
          {"map_cell", {est.cell.row, est.cell.col}},
          {"map_location", {est.location.x, est.location.y}},
          {"entropy", entropy(b)}};
}

}  // namespace slg
