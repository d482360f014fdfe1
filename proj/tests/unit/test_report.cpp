#include <cmath>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "clvstack/report.hpp"
#include "support/oracles.hpp"

using namespace clvstack;

namespace {

const std::vector<std::string> kNames{"a", "b", "c"};

// One split on `feature` with the given gain and cover.
RegressionTree stump(std::int32_t feature, double gain, double cover) {
  std::vector<TreeNode> nodes(3);
  nodes[0].feature = feature;
  nodes[0].threshold = 0.5;
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[0].split_gain = gain;
  nodes[0].cover = cover;
  nodes[1].value = -1;
  nodes[2].value = 1;
  return RegressionTree(std::move(nodes), 3, {});
}

}  // namespace

TEST(Metrics, HandCases) {
  const std::vector<double> p{1, 2, 3}, a{2, 2, 5};
  EXPECT_NEAR(rmse(p, a), std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_NEAR(mae(p, a), 1.0, 1e-12);
  EXPECT_EQ(rmse(a, a), 0.0);
  EXPECT_EQ(mae(a, a), 0.0);
  EXPECT_EQ(rmse(std::vector<double>{0}, std::vector<double>{3}), 3.0);
  EXPECT_THROW(rmse(std::vector<double>{}, std::vector<double>{}), InputError);
  EXPECT_THROW(mae(p, std::vector<double>{1, 2}), InputError);
}

TEST(Metrics, RmseDominatesMaeAndSymmetry) {
  Rng rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<double> p(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.normal() * 10;
      a[i] = rng.normal() * 10;
    }
    const double r = rmse(p, a), m = mae(p, a);
    ASSERT_GE(r, m * (1 - 1e-15));
    ASSERT_EQ(r, rmse(a, p));
    ASSERT_EQ(m, mae(a, p));
  }
  const auto report = evaluate(std::vector<double>{1, 2}, std::vector<double>{1, 4}, true);
  EXPECT_EQ(report.n, 2u);
  EXPECT_EQ(report.residuals, (std::vector<double>{0, -2}));
  EXPECT_EQ(nlohmann::json(report)["mae"], 1.0);
}

TEST(Importance, SingleStump) {
  const std::vector<RegressionTree> trees{stump(0, 4.0, 10.0)};
  const auto r = compute_importance(std::span<const RegressionTree>(trees), kNames);
  EXPECT_EQ(r.features[0].weight, 1u);
  EXPECT_EQ(r.features[0].gain, 4.0);
  EXPECT_EQ(r.features[0].cover, 10.0);
  EXPECT_EQ(r.features[0].total_gain, 4.0);
  for (int f : {1, 2}) {
    EXPECT_EQ(r.features[f].weight, 0u);
    EXPECT_EQ(r.features[f].gain, 0.0);
    EXPECT_EQ(r.features[f].total_cover, 0.0);
  }
}

TEST(Importance, TwoTreesAverage) {
  const std::vector<RegressionTree> trees{stump(1, 2.0, 5.0), stump(1, 6.0, 7.0)};
  const auto r = compute_importance(std::span<const RegressionTree>(trees), kNames);
  EXPECT_EQ(r.features[1].weight, 2u);
  EXPECT_EQ(r.features[1].gain, 4.0);
  EXPECT_EQ(r.features[1].total_gain, 8.0);
  EXPECT_EQ(r.features[1].cover, 6.0);
}

TEST(Importance, LeafOnlyAndNameMismatch) {
  const std::vector<RegressionTree> trees{RegressionTree::leaf(1.0, 3)};
  const auto r = compute_importance(std::span<const RegressionTree>(trees), kNames);
  for (const auto& f : r.features) EXPECT_EQ(f.weight, 0u);
  EXPECT_EQ(rank_features(r, ImportanceType::kGain), kNames);
  const std::vector<std::string> two{"a", "b"};
  EXPECT_THROW(compute_importance(std::span<const RegressionTree>(trees), two), InputError);
}

TEST(Importance, Ranking) {
  ImportanceReport r;
  r.features = {{"first"}, {"second"}};
  r.features[0].gain = 5;
  r.features[1].gain = 1;
  EXPECT_EQ(rank_features(r, ImportanceType::kGain), (std::vector<std::string>{"first", "second"}));
  r.features[1].gain = 9;
  EXPECT_EQ(rank_features(r, ImportanceType::kGain), (std::vector<std::string>{"second", "first"}));
  // ties break by name
  ImportanceReport t;
  t.features = {{"zeta"}, {"alpha"}, {"mid"}};
  t.features[2].weight = 3;
  EXPECT_EQ(rank_features(t, ImportanceType::kWeight), (std::vector<std::string>{"mid", "alpha", "zeta"}));
  EXPECT_EQ(parse_importance_type("total_cover"), ImportanceType::kTotalCover);
  EXPECT_THROW(parse_importance_type("shap"), InputError);
}

TEST(Importance, IdentitiesOnFittedEnsembles) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = testkit::random_matrix(rng, 80, 3);
    std::vector<double> y(80);
    for (std::size_t i = 0; i < 80; ++i) y[i] = x(i, 0) * x(i, 1) + rng.normal() * 0.1;
    ForestParams fp;
    fp.n_estimators = 10;
    fp.seed = static_cast<std::uint64_t>(trial);
    const auto forest = fit_forest(x, y, fp);
    const auto boost = fit_boost(x, y, BoostParams::xgboost_config());
    for (const auto& [report, trees] :
         {std::pair{compute_importance(forest, kNames), &forest.trees},
          std::pair{compute_importance(boost, kNames), &boost.trees}}) {
      std::size_t internal = 0, weight = 0;
      for (const auto& t : *trees) internal += t.internal_count();
      for (const auto& f : report.features) {
        weight += f.weight;
        EXPECT_NEAR(f.total_gain, static_cast<double>(f.weight) * f.gain, 1e-9 * std::abs(f.total_gain));
        EXPECT_NEAR(f.total_cover, static_cast<double>(f.weight) * f.cover, 1e-9 * std::abs(f.total_cover));
      }
      EXPECT_EQ(weight, internal);
    }
    // additivity over trees
    const std::span<const RegressionTree> all(forest.trees);
    const auto whole = compute_importance(all, kNames);
    const auto head = compute_importance(all.first(4), kNames);
    const auto tail = compute_importance(all.subspan(4), kNames);
    for (std::size_t f = 0; f < 3; ++f) {
      EXPECT_EQ(whole.features[f].weight, head.features[f].weight + tail.features[f].weight);
      EXPECT_NEAR(whole.features[f].total_gain, head.features[f].total_gain + tail.features[f].total_gain,
                  1e-9 * whole.features[f].total_gain);
    }
  }
}

TEST(Importance, CsvLayout) {
  const std::vector<RegressionTree> trees{stump(0, 4.0, 10.0)};
  std::ostringstream out;
  write_importance_csv(out, compute_importance(std::span<const RegressionTree>(trees), kNames));
  EXPECT_EQ(out.str(),
            "feature,weight,gain,cover,total_gain,total_cover\n"
            "a,1,4,10,4,10\n"
            "b,0,0,0,0,0\n"
            "c,0,0,0,0,0\n");
}
