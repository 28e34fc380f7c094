#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/dataset.hpp"
#include "slg/error.hpp"
#include "slg/grid.hpp"
#include "slg/map.hpp"
#include "slg/relation.hpp"

namespace slg {

// Parameters of one relation's rule. Not every rule reads every field.
struct RelationParams {
  double rho = 1.0;    // proximity scale, multiple of the landmark diameter
  double tau = 3.0;    // softness, meters
  double kappa = 2.0;  // angular concentration (in_front_of / behind)
  double width = 5.0;  // annulus radius, meters (around)
  double floor = 0.01; // probability floor
};

struct ExpertParams {
  std::array<RelationParams, kRelationCount> relation{};

  RelationParams& operator[](Relation r) { return relation[index_of(r)]; }
  const RelationParams& operator[](Relation r) const { return relation[index_of(r)]; }

  static ExpertParams defaults() {
    ExpertParams p;
    p[Relation::at] = {0.15, 1.5, 0.0, 1.0, 0.01};
    p[Relation::near] = {1.0, 3.0, 0.0, 1.0, 0.01};
    p[Relation::close_to] = {0.7, 2.5, 0.0, 1.0, 0.01};
    p[Relation::far_from] = {1.5, 4.0, 0.0, 1.0, 0.01};
    p[Relation::in_front_of] = {1.0, 3.0, 2.0, 1.0, 0.01};
    p[Relation::behind] = {1.0, 3.0, 2.0, 1.0, 0.01};
    p[Relation::next_to] = {0.4, 1.5, 0.0, 1.0, 0.01};
    p[Relation::beside] = {0.4, 1.5, 0.0, 1.0, 0.01};
    p[Relation::by] = {0.5, 2.0, 0.0, 1.0, 0.01};
    p[Relation::around] = {1.0, 4.0, 0.0, 6.0, 0.01};
    return p;
  }

  void validate() const {
    for (int i = 0; i < kRelationCount; ++i) {
      const auto& r = relation[i];
      const auto finite = std::isfinite(r.rho) && std::isfinite(r.tau) && std::isfinite(r.kappa) &&
                          std::isfinite(r.width) && std::isfinite(r.floor);
      if (!finite || !(r.tau > 0) || !(r.kappa >= 0) || !(r.rho > 0) || !(r.width > 0) ||
          !(r.floor > 0) || !(r.floor <= 0.05))
        throw ParamError("invalid expert parameters for relation '" +
                         std::string(kRelationNames[i]) + "'");
    }
  }
};

inline nlohmann::json to_json(const ExpertParams& p) {
  nlohmann::json j = nlohmann::json::object();
  for (Relation r : kAllRelations) {
    const auto& q = p[r];
    j[std::string(name_of(r))] = {
        {"rho", q.rho}, {"tau", q.tau}, {"kappa", q.kappa}, {"width", q.width}, {"floor", q.floor}};
  }
  return j;
}

inline ExpertParams expert_params_from_json(const nlohmann::json& j) {
  ExpertParams p = ExpertParams::defaults();
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      auto& q = p[relation_named(it.key())];
      q.rho = it->value("rho", q.rho);
      q.tau = it->value("tau", q.tau);
      q.kappa = it->value("kappa", q.kappa);
      q.width = it->value("width", q.width);
      q.floor = it->value("floor", q.floor);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParamError(std::string("malformed expert parameter document: ") + e.what());
  }
  p.validate();
  return p;
}

// --- geometry consumed by the rules -----------------------------------------

// Per-query geometry: signed distance to the landmark, its diameter, and the
// best alignment with an entrance's outward normal (front) or its reverse
// (back). has_front is false for landmarks without entrances.
struct RelationGeometry {
  double d = 0.0;
  double diameter = 1.0;
  double front_cos = 1.0;
  double back_cos = 1.0;
  bool has_front = false;
};

struct LandmarkFrame {
  const Landmark* landmark = nullptr;
  double diameter = 1.0;
  std::vector<Vec2> fronts;

  explicit LandmarkFrame(const Landmark& lm)
      : landmark(&lm), diameter(polygon_diameter(lm.polygon)), fronts(front_directions(lm)) {}

  RelationGeometry at(Vec2 x) const {
    RelationGeometry g;
    g.d = signed_distance(x, landmark->polygon);
    g.diameter = diameter;
    g.has_front = !fronts.empty();
    g.front_cos = -1.0;
    g.back_cos = -1.0;
    for (std::size_t i = 0; i < fronts.size(); ++i) {
      const Vec2 v = x - landmark->entrances[i];
      const double n = norm(v);
      const double c = n > 0.0 ? dot(fronts[i], v) / n : 1.0;
      g.front_cos = std::max(g.front_cos, c);
      g.back_cos = std::max(g.back_cos, n > 0.0 ? -c : 1.0);
    }
    if (!g.has_front) g.front_cos = g.back_cos = 1.0;
    return g;
  }
};

// --- forward-mode dual numbers for parameter gradients ----------------------

template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> g{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: constants promote implicitly
  static Dual variable(double value, int i) {
    Dual d(value);
    d.g[i] = 1.0;
    return d;
  }

  friend Dual operator+(Dual a, const Dual& b) {
    a.v += b.v;
    for (int i = 0; i < N; ++i) a.g[i] += b.g[i];
    return a;
  }
  friend Dual operator-(Dual a, const Dual& b) {
    a.v -= b.v;
    for (int i = 0; i < N; ++i) a.g[i] -= b.g[i];
    return a;
  }
  friend Dual operator-(Dual a) {
    a.v = -a.v;
    for (auto& x : a.g) x = -x;
    return a;
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.v * b.v);
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    return r;
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    Dual r(a.v / b.v);
    for (int i = 0; i < N; ++i) r.g[i] = (a.g[i] * b.v - a.v * b.g[i]) / (b.v * b.v);
    return r;
  }
};

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) { return x.v; }

inline double exp_of(double x) { return std::exp(x); }
template <int N>
Dual<N> exp_of(const Dual<N>& x) {
  Dual<N> r(std::exp(x.v));
  for (int i = 0; i < N; ++i) r.g[i] = r.v * x.g[i];
  return r;
}

inline double log_of(double x) { return std::log(x); }
template <int N>
Dual<N> log_of(const Dual<N>& x) {
  Dual<N> r(std::log(x.v));
  for (int i = 0; i < N; ++i) r.g[i] = x.g[i] / x.v;
  return r;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
template <int N>
Dual<N> sigmoid(const Dual<N>& z) {
  const double s = sigmoid(z.v);
  Dual<N> r(s);
  for (int i = 0; i < N; ++i) r.g[i] = s * (1.0 - s) * z.g[i];
  return r;
}

template <class T>
struct RuleParams {
  T rho, tau, kappa, width;
};

// Rule value before the probability floor is applied.
template <class T>
T expert_rule(Relation r, const RelationGeometry& g, const RuleParams<T>& p) {
  const auto proximity = [&] { return sigmoid((p.rho * T(g.diameter) - T(g.d)) / p.tau); };
  switch (r) {
    case Relation::at:
      if (g.d <= 0.0) return T(1.0);
      return proximity();
    case Relation::near:
    case Relation::close_to:
    case Relation::by:
    case Relation::next_to:
    case Relation::beside:
      return proximity();
    case Relation::far_from:
      return T(1.0) - proximity();
    case Relation::in_front_of:
    case Relation::behind: {
      if (!g.has_front) return proximity();
      const double c = r == Relation::in_front_of ? g.front_cos : g.back_cos;
      return proximity() * exp_of(p.kappa * T(c - 1.0));
    }
    case Relation::around: {
      if (g.d <= 0.0) return T(0.0);
      const T dev = T(g.d) - p.width;
      return exp_of(-(dev * dev) / (T(2.0) * p.tau * p.tau));
    }
  }
  return T(0.5);
}

inline double clamp_probability(double p, double floor) { return std::clamp(p, floor, 1.0 - floor); }

inline double expert_likelihood(Relation r, const RelationGeometry& g, const RelationParams& p) {
  const RuleParams<double> rp{p.rho, p.tau, p.kappa, p.width};
  return clamp_probability(expert_rule(r, g, rp), p.floor);
}

// p(relation | x, landmark, map) under the rule family.
inline double expert_likelihood(Relation r, Vec2 x, const Landmark& lm, const WorldMap& /*map*/,
                                const ExpertParams& params) {
  params.validate();
  return expert_likelihood(r, LandmarkFrame(lm).at(x), params[r]);
}

// --- grounded fields ----------------------------------------------------------

struct LikelihoodField {
  GridSpec spec;
  Relation relation = Relation::near;
  std::string landmark_id;
  double floor = 0.01;
  Grid<double> values;
};

// Evaluates the rule at every cell center. Cells inside any landmark get the
// floor, except cells inside the reference landmark for "at", which get 1 - floor.
inline LikelihoodField ground_field(Relation r, const Landmark& lm, const WorldMap& map, const GridSpec& spec,
                                    const ExpertParams& params) {
  if (!map.find(lm.id)) throw MapError("unknown landmark '" + lm.id + "'");
  params.validate();
  const auto& rp = params[r];
  LikelihoodField f{spec, r, lm.id, rp.floor, Grid<double>(spec.rows, spec.cols, rp.floor)};
  const LandmarkFrame frame(lm);
  for (int row = 0; row < spec.rows; ++row)
    for (int col = 0; col < spec.cols; ++col) {
      const Vec2 x = spec.center(Cell{row, col});
      if (map.inside_any_landmark(x)) {
        if (r == Relation::at && point_in_polygon(x, lm.polygon)) f.values(row, col) = 1.0 - rp.floor;
        continue;
      }
      f.values(row, col) = expert_likelihood(r, frame.at(x), rp);
    }
  return f;
}

inline LikelihoodField ground_field(Relation r, std::string_view landmark_id, const WorldMap& map,
                                    const GridSpec& spec, const ExpertParams& params) {
  return ground_field(r, map.at(landmark_id), map, spec, params);
}

// --- Chance baseline ----------------------------------------------------------

// Uniform draw on the open interval (0, 1).
template <class Rng>
double chance_likelihood(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double u;
  do {
    u = dist(rng);
  } while (u <= 0.0 || u >= 1.0);
  return u;
}

class ChanceLikelihood {
 public:
  explicit ChanceLikelihood(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    double u;
    do {
      u = dist_(rng_);
    } while (u <= 0.0 || u >= 1.0);
    return u;
  }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

// --- maximum likelihood fitting ----------------------------------------------

struct FitOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 5000;
  double initial_step = 0.5;
};

struct RelationFit {
  Relation relation;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective;  // mean log-likelihood after each accepted step
};

struct FitReport {
  std::vector<RelationFit> relations;
};

namespace detail {

// Free parameters per rule, in log space: rho/tau for distance rules,
// rho/tau/kappa for frame-of-reference rules, width/tau for around.
inline int free_parameter_count(Relation r) {
  if (r == Relation::in_front_of || r == Relation::behind) return 3;
  return 2;
}

struct FitSample {
  RelationGeometry geometry;
  int label;
};

inline RuleParams<Dual<3>> rule_params(Relation r, const std::array<double, 3>& theta, const RelationParams& base) {
  using D = Dual<3>;
  RuleParams<D> p{D(base.rho), D(base.tau), D(base.kappa), D(base.width)};
  if (r == Relation::around) {
    p.width = exp_of(D::variable(theta[0], 0));
    p.tau = exp_of(D::variable(theta[1], 1));
  } else {
    p.rho = exp_of(D::variable(theta[0], 0));
    p.tau = exp_of(D::variable(theta[1], 1));
    if (free_parameter_count(r) == 3) p.kappa = exp_of(D::variable(theta[2], 2));
  }
  return p;
}

// Mean Bernoulli log-likelihood and its gradient in log-parameter space.
inline Dual<3> mean_log_likelihood(Relation r, const std::vector<FitSample>& samples,
                                   const std::array<double, 3>& theta, const RelationParams& base) {
  using D = Dual<3>;
  const auto params = rule_params(r, theta, base);
  D total(0.0);
  for (const auto& s : samples) {
    D p = expert_rule(r, s.geometry, params);
    if (p.v <= base.floor) p = D(base.floor);
    if (p.v >= 1.0 - base.floor) p = D(1.0 - base.floor);
    total = total + (s.label ? log_of(p) : log_of(D(1.0) - p));
  }
  return total / D(static_cast<double>(samples.size()));
}

}  // namespace detail

// Gradient ascent with backtracking on the mean Bernoulli log-likelihood,
// one relation at a time. Relations absent from the dataset keep `initial`.
inline ExpertParams fit_expert_params(const Dataset& data, const ExpertParams& initial = ExpertParams::defaults(),
                                      const FitOptions& opt = {}, FitReport* report = nullptr) {
  initial.validate();
  std::array<std::vector<detail::FitSample>, kRelationCount> by_relation;
  std::map<std::pair<std::string, std::string>, LandmarkFrame> frames;
  for (const auto& pt : data.points) {
    const WorldMap& m = data.map_of(pt);
    const auto key = std::make_pair(pt.map_id, pt.landmark_id);
    auto it = frames.find(key);
    if (it == frames.end()) it = frames.emplace(key, LandmarkFrame(m.at(pt.landmark_id))).first;
    by_relation[index_of(pt.relation)].push_back({it->second.at(pt.location), pt.label});
  }

  ExpertParams out = initial;
  bool any = false;
  for (Relation r : kAllRelations) {
    const auto& samples = by_relation[index_of(r)];
    if (samples.empty()) continue;
    any = true;
    const auto positives = std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.label == 1; });
    if (positives == 0 || positives == static_cast<long>(samples.size()))
      throw DatasetError("degenerate dataset: relation '" + std::string(name_of(r)) +
                         "' has labels of a single class");

    const auto& base = initial[r];
    std::array<double, 3> theta{};
    if (r == Relation::around) {
      theta = {std::log(base.width), std::log(base.tau), 0.0};
    } else {
      theta = {std::log(base.rho), std::log(base.tau), std::log(std::max(base.kappa, 1e-3))};
    }
    const int k = detail::free_parameter_count(r);

    RelationFit fit{r};
    auto cur = detail::mean_log_likelihood(r, samples, theta, base);
    fit.objective.push_back(cur.v);
    double step = opt.initial_step;
    for (fit.iterations = 0; fit.iterations < opt.max_iterations; ++fit.iterations) {
      double gmax = 0.0;
      for (int i = 0; i < k; ++i) gmax = std::max(gmax, std::abs(cur.g[i]));
      if (gmax < opt.gradient_tolerance) {
        fit.converged = true;
        break;
      }
      bool accepted = false;
      for (int attempt = 0; attempt < 60; ++attempt) {
        std::array<double, 3> trial = theta;
        for (int i = 0; i < k; ++i) trial[i] += step * cur.g[i];
        auto next = detail::mean_log_likelihood(r, samples, trial, base);
        if (next.v >= cur.v) {
          theta = trial;
          cur = next;
          step *= 1.5;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        fit.converged = true;  // no ascent direction left at machine precision
        break;
      }
      fit.objective.push_back(cur.v);
    }

    auto& q = out[r];
    if (r == Relation::around) {
      q.width = std::exp(theta[0]);
      q.tau = std::exp(theta[1]);
    } else {
      q.rho = std::exp(theta[0]);
      q.tau = std::exp(theta[1]);
      if (k == 3) q.kappa = std::exp(theta[2]);
    }
    if (report) report->relations.push_back(std::move(fit));
  }
  if (!any) throw DatasetError("empty dataset");
  out.validate();
  return out;
}

}  // namespace slg
