#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "slg/error.hpp"

namespace slg {

struct TTest {
  double t = 0;
  double df = 0;
  double p = 1;
};

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator).
inline double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// Two-sided Welch t-test on unequal-variance samples.
inline TTest welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("Welch test needs at least two values per sample");
  const double va = sd_of(a) * sd_of(a) / a.size(), vb = sd_of(b) * sd_of(b) / b.size();
  const double diff = mean_of(a) - mean_of(b);
  TTest r;
  if (va + vb == 0.0) {
    r.t = diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
    r.df = static_cast<double>(a.size() + b.size() - 2);
    r.p = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = diff / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (a.size() - 1.0) + vb * vb / (b.size() - 1.0));
  r.p = two_sided_p(r.t, r.df);
  return r;
}

// Two-sided paired t-test on a - b.
inline TTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("paired test needs vectors of equal length");
  if (a.size() < 2) throw ConfigError("paired test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double m = mean_of(d), se = sd_of(d) / std::sqrt(static_cast<double>(d.size()));
  TTest r;
  r.df = static_cast<double>(d.size() - 1);
  if (se == 0.0) {
    r.t = m == 0.0 ? 0.0 : std::copysign(INFINITY, m);
    r.p = m == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = m / se;
  r.p = two_sided_p(r.t, r.df);
  return r;
}

}  // namespace slg
