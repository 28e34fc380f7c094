#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "slg/eval.hpp"

using namespace slg;

namespace {

WorldMap square_map(const std::string& id) {
  WorldMap m;
  m.id = id;
  m.width = m.height = 32;
  m.landmarks.push_back({"b1", "Building 1", {{6, 5}, {13, 5}, {13, 15}, {6, 15}}, {{9.5, 5}}});
  m.landmarks.push_back({"b2", "Building 2", {{20, 18}, {27, 18}, {27, 22}, {20, 22}}, {}});
  return m;
}

Dataset regions(int n, int points_per_region) {
  Dataset d;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 31.5);
  for (int i = 0; i < n; ++i) {
    const std::string id = "r" + std::to_string(i);
    d.add_map(square_map(id));
    for (int k = 0; k < points_per_region; ++k)
      d.points.push_back({id, k % 2 ? "b1" : "b2", {u(rng), u(rng)}, static_cast<Relation>(k % kRelationCount),
                          k % 3 == 0, Provenance::human, "a"});
  }
  return d;
}

Dataset single_point_set() {
  Dataset d;
  d.add_map(square_map("m"));
  d.points.push_back({"m", "b1", {17.5, 9.5}, Relation::near, 1, Provenance::human, "a"});
  return d;
}

}  // namespace

TEST(Split, ThirtyFiveRegionsGiveTwentyOneAndFourteen) {
  const auto d = regions(35, 4);
  const auto s = split_by_region(d, 1);
  EXPECT_EQ(regions_of(s.train).size(), 21u);
  EXPECT_EQ(regions_of(s.test).size(), 14u);
  const auto train_ids = regions_of(s.train);
  const std::set<std::string> tr(train_ids.begin(), train_ids.end());
  for (const auto& id : regions_of(s.test)) EXPECT_FALSE(tr.count(id));
  EXPECT_EQ(s.train.points.size() + s.test.points.size(), d.points.size());
  for (const auto& p : s.train.points) EXPECT_TRUE(s.train.maps.count(p.map_id));
  for (const auto& p : s.test.points) EXPECT_TRUE(s.test.maps.count(p.map_id));
}

TEST(Split, SmallCountsKeepRatioAndOneRegionIsAnError) {
  const auto s = split_by_region(regions(5, 2), 9);
  EXPECT_EQ(regions_of(s.train).size(), 3u);
  EXPECT_EQ(regions_of(s.test).size(), 2u);
  const auto two = split_by_region(regions(2, 2), 9);
  EXPECT_EQ(regions_of(two.train).size(), 1u);
  EXPECT_EQ(regions_of(two.test).size(), 1u);
  EXPECT_THROW(split_by_region(regions(1, 5), 1), DatasetError);
}

TEST(Split, DeterministicPerSeed) {
  const auto d = regions(10, 2);
  EXPECT_EQ(regions_of(split_by_region(d, 4).test), regions_of(split_by_region(d, 4).test));
}

TEST(Augment, EightTransformsOfOneRecordKeepLabels) {
  const auto d = single_point_set();
  const auto a = augment(d);
  ASSERT_EQ(a.points.size(), 8u);
  EXPECT_EQ(a.maps.size(), 8u);
  std::set<std::string> ids;
  for (const auto& p : a.points) {
    EXPECT_EQ(p.label, 1);
    EXPECT_EQ(p.relation, Relation::near);
    ids.insert(p.map_id);
  }
  EXPECT_EQ(ids.size(), 8u);
  EXPECT_NO_THROW(a.validate());
}

TEST(Augment, TransformedLocationMatchesTransformedRaster) {
  const auto d = regions(1, 30);
  const auto a = augment(d);
  const WorldMap& base = d.maps.at("r0");
  const GridSpec spec = base.grid(1.0);
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t i = 0; i < d.points.size(); ++i) {
      const auto& p = d.points[i];
      const auto& q = a.points[t * d.points.size() + i];
      const WorldMap& tm = a.maps.at(q.map_id);
      // Signed distance to the focus is rigid-motion invariant.
      const auto r0 = rasterize(base, p.landmark_id, spec);
      const auto r1 = rasterize(tm, q.landmark_id, tm.grid(1.0));
      const Cell c0 = spec.locate(p.location), c1 = tm.grid(1.0).locate(q.location);
      ASSERT_TRUE(tm.grid(1.0).contains(c1));
      EXPECT_NEAR(r0.sdf(c0.row, c0.col), r1.sdf(c1.row, c1.col), 1e-9);
      EXPECT_EQ(r0.occupancy(c0.row, c0.col), r1.occupancy(c1.row, c1.col));
    }
  }
}

TEST(Augment, LabelMeansPerRelationPreserved) {
  const auto d = regions(3, 50);
  const auto a = augment(d);
  std::map<Relation, std::pair<double, double>> before, after;
  for (const auto& p : d.points) before[p.relation].first += p.label, before[p.relation].second += 1;
  for (const auto& p : a.points) after[p.relation].first += p.label, after[p.relation].second += 1;
  for (const auto& [r, v] : before) EXPECT_DOUBLE_EQ(v.first / v.second, after[r].first / after[r].second);
}

TEST(Nll, ChanceHasUnitMeanAndSd) {
  const auto d = regions(1, 10000);
  const auto rep = eval_nll(chance_predictor(5), d);
  EXPECT_EQ(rep.overall.n, 10000u);
  EXPECT_GE(rep.overall.mean, 0.95);
  EXPECT_LE(rep.overall.mean, 1.05);
  EXPECT_GE(rep.overall.sd, 0.9);
  EXPECT_LE(rep.overall.sd, 1.1);
}

TEST(Nll, ClampedPerfectModelSitsAtFloor) {
  const auto d = regions(1, 200);
  const double eps = 0.01;
  const Predictor perfect = [eps](const Dataset& ds) {
    std::vector<double> p;
    for (const auto& pt : ds.points) p.push_back(pt.label ? 1 - eps : eps);
    return p;
  };
  const auto rep = eval_nll(perfect, d);
  EXPECT_NEAR(rep.overall.mean, -std::log(1 - eps), 1e-12);
  EXPECT_NEAR(rep.overall.sd, 0.0, 1e-12);
}

TEST(Nll, HistogramAndBreakdownMatchDirectCounts) {
  const auto d = regions(1, 3000);
  const auto rep = eval_nll(chance_predictor(2), d);
  std::size_t in_range = 0, binned = 0;
  for (double v : rep.values) in_range += v <= 2.0;
  for (auto b : rep.bins) binned += b;
  EXPECT_EQ(binned, in_range);
  EXPECT_EQ(binned + rep.overflow, d.points.size());
  // Bin 0 counts NLL in [0, 0.05).
  std::size_t first = 0;
  for (double v : rep.values) first += v < 0.05;
  EXPECT_EQ(rep.bins[0], first);
  std::map<Relation, std::vector<double>> by;
  for (std::size_t i = 0; i < d.points.size(); ++i) by[d.points[i].relation].push_back(rep.values[i]);
  ASSERT_EQ(rep.per_relation.size(), by.size());
  for (const auto& [r, v] : by) {
    double s = 0;
    for (double x : v) s += x;
    EXPECT_NEAR(rep.per_relation.at(r).mean, s / v.size(), 1e-12);
    EXPECT_EQ(rep.per_relation.at(r).n, v.size());
  }
  const auto j = to_json(rep);
  EXPECT_EQ(j["histogram"].size(), 40u);
  EXPECT_EQ(histogram_table(rep).substr(0, 8), "bin_low\t");
}

TEST(Nll, EmptyTestSetIsAnError) {
  Dataset d;
  d.add_map(square_map("m"));
  EXPECT_THROW(eval_nll(chance_predictor(1), d), DatasetError);
}

TEST(Models, ExpertPredictorEqualsRule) {
  std::mt19937_64 rng(4);
  lgn::SynthOptions opt;
  opt.locations = 5;
  const auto d = lgn::synthesize_stage2(rng, 1, 1, opt);
  const auto p = expert_predictor(ExpertParams::defaults())(d);
  ASSERT_EQ(p.size(), d.points.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& pt = d.points[i];
    const auto& m = d.map_of(pt);
    EXPECT_NEAR(p[i], expert_likelihood(pt.relation, pt.location, m.at(pt.landmark_id), m, ExpertParams::defaults()),
                1e-12);
  }
}

TEST(Models, LgnPredictorAgreesWithTrainingLoss) {
  lgn::LgnConfig cfg;
  cfg.features = 2;
  cfg.map_embedding = 4;
  cfg.relation_embedding = 3;
  cfg.hidden = 4;
  const auto model = lgn::LgnModel::create(cfg, 7);
  const auto d = regions(2, 40);
  const auto nll = per_point_nll(lgn_predictor(model), d);
  EXPECT_NEAR(mean_of(nll), lgn::mean_nll(model, lgn::make_examples(d)), 1e-9);
}

TEST(Compare, SelfAntisymmetryAndSeparation) {
  const auto d = regions(1, 10000);
  const auto chance = per_point_nll(chance_predictor(1), d);
  std::vector<double> good(chance.size(), -std::log(0.99));
  const auto cs = compare({{"chance", chance}, {"chance-copy", chance}, {"good", good}});
  ASSERT_EQ(cs.size(), 6u);
  for (const auto& c : cs) {
    if ((c.a == "chance" && c.b == "chance-copy") || (c.a == "chance-copy" && c.b == "chance")) {
      EXPECT_EQ(c.mean_difference, 0.0);
      EXPECT_EQ(c.test.p, 1.0);
    }
    if (c.a == "chance" && c.b == "good") EXPECT_LT(c.test.p, 1e-6);
  }
  const auto ab = compare({{"a", chance}, {"b", good}});
  EXPECT_DOUBLE_EQ(ab[0].mean_difference, -ab[1].mean_difference);
  EXPECT_DOUBLE_EQ(ab[0].test.t, -ab[1].test.t);
  EXPECT_THROW(compare({{"a", chance}, {"b", {1.0, 2.0}}}), ConfigError);
}

TEST(Compare, PairedTestMatchesReference) {
  // scipy.stats.ttest_rel on the same vectors.
  const std::vector<double> a{0.3, 1.2, 0.8, 2.5, 0.1, 0.9, 1.7}, b{0.5, 1.0, 1.1, 2.0, 0.4, 1.3, 1.9};
  const auto t = paired_t_test(a, b);
  EXPECT_NEAR(t.t, -0.8100925873009827, 1e-12);
  EXPECT_NEAR(t.p, 0.448815059419183, 1e-10);
  EXPECT_EQ(t.df, 6.0);
}
