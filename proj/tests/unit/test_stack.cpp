#include <cmath>
#include <numeric>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "clvstack/stack.hpp"
#include "support/oracles.hpp"

using namespace clvstack;

namespace {

struct Data {
  Matrix x;
  std::vector<double> y;
};

Data make_data(std::uint64_t seed, std::size_t n = 120) {
  Rng rng(seed);
  Data d{testkit::random_matrix(rng, n, 4, 0, 10), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i)
    d.y[i] = 0.5 * d.x(i, 0) + std::sqrt(d.x(i, 1)) * (d.x(i, 2) > 5 ? 2.0 : 0.0) + 0.2 * rng.normal();
  return d;
}

StackParams small_stack(bool passthrough) {
  ForestParams forest;
  forest.n_estimators = 20;
  forest.tree.max_depth = 8;
  StackParams p;
  p.base_specs = {{"rf", forest}, {"xgb", BoostParams::xgboost_config()}, {"enet", ElasticNetParams{}}};
  p.use_features_in_secondary = passthrough;
  p.global_seed = 7;
  return p;
}

}  // namespace

TEST(Folds, SizesAndPartition) {
  const auto p4 = make_folds(4, 2, 1);
  EXPECT_EQ(p4.rows_in(0).size(), 2u);
  EXPECT_EQ(p4.rows_in(1).size(), 2u);
  const auto p5 = make_folds(5, 2, 1);
  EXPECT_EQ(p5.rows_in(0).size(), 3u);
  EXPECT_EQ(p5.rows_in(1).size(), 2u);
  EXPECT_EQ(make_folds(37, 5, 9).assignment, make_folds(37, 5, 9).assignment);
  EXPECT_NE(make_folds(37, 5, 9).assignment, make_folds(37, 5, 10).assignment);

  for (std::size_t n : {2u, 7u, 100u, 1001u})
    for (std::size_t k : {2u, 3u, 5u, 10u}) {
      if (k > n) continue;
      const auto plan = make_folds(n, k, n * 31 + k);
      std::vector<std::size_t> sizes(k, 0);
      for (auto f : plan.assignment) {
        ASSERT_LT(f, k);
        ++sizes[f];
      }
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      EXPECT_LE(*hi - *lo, 1u);
      EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}), n);
    }
  EXPECT_THROW(make_folds(3, 4, 0), InputError);
  EXPECT_THROW(make_folds(3, 1, 0), InputError);
}

TEST(Oof, LeaveOneOutMean) {
  const auto x = Matrix::from_rows({{0}, {1}, {2}});
  const std::vector<double> y{0, 3, 6};
  const std::vector<testkit::MeanLearner> learners{{}};
  const auto oof = oof_predictions<testkit::MeanLearner>(x, y, learners, make_folds(3, 3, 0), 0);
  ASSERT_EQ(oof.rows(), 3u);
  ASSERT_EQ(oof.cols(), 1u);
  EXPECT_EQ(oof(0, 0), 4.5);
  EXPECT_EQ(oof(1, 0), 3.0);
  EXPECT_EQ(oof(2, 0), 1.5);
}

TEST(Oof, NoLeakage) {
  Rng rng(1);
  const std::size_t n = 300;
  Matrix x(n, 2);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = rng.normal();
    y[i] = rng.normal();
  }
  const std::vector<testkit::MemorizingLearner> learners{{"a"}, {"b"}};
  for (std::size_t k : {2u, 5u, 10u}) {
    for (std::size_t threads : {1u, 4u}) {
      const auto oof = oof_predictions<testkit::MemorizingLearner>(x, y, learners, make_folds(n, k, 3), 3, threads);
      ASSERT_EQ(oof.cols(), 2u);
      for (double v : oof.values()) ASSERT_EQ(v, 0.0);
    }
  }
}

TEST(Stack, OracleBaseGetsUnitWeight) {
  Rng rng(2);
  const std::size_t n = 200;
  Matrix x(n, 3);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y[i] = 3 * x(i, 0) - x(i, 1) + 5;
    x(i, 2) = y[i];  // the oracle's column
  }
  testkit::ColumnOracleLearner oracle;
  oracle.column = 2;
  BasicStackParams<testkit::ColumnOracleLearner> p;
  p.base_specs = {oracle};
  p.use_features_in_secondary = false;
  p.meta_params.penalty_strength = 1e-9;
  const auto model = fit_stack(x, y, p);
  ASSERT_EQ(model.meta.coefficients.size(), 1u);
  EXPECT_NEAR(model.meta.coefficients[0], 1.0, 1e-3);
  EXPECT_NEAR(model.meta.intercept, 0.0, 1e-3);
}

TEST(Stack, LayoutAndHandPredictions) {
  const auto d = make_data(3);
  const auto model = fit_stack(d.x, d.y, small_stack(true), std::vector<std::string>{"f0", "f1", "f2", "f3"}, 1);
  EXPECT_EQ(model.meta.coefficients.size(), 7u);
  EXPECT_EQ(model.meta_columns,
            (std::vector<std::string>{"rf", "xgb", "enet", "f0", "f1", "f2", "f3"}));
  EXPECT_EQ(model.base_models.size(), 3u);
  const auto narrow = fit_stack(d.x, d.y, small_stack(false));
  EXPECT_EQ(narrow.meta.coefficients.size(), 3u);

  // meta weight 1 on one base column reproduces that base model
  auto pick = model;
  std::fill(pick.meta.coefficients.begin(), pick.meta.coefficients.end(), 0.0);
  pick.meta.coefficients[1] = 1.0;
  pick.meta.intercept = 0.0;
  EXPECT_EQ(pick.predict(d.x.row(5)), model.base_models[1].predict(d.x.row(5)));
  EXPECT_THROW(model.predict(std::vector<double>{1, 2}), InputError);
}

TEST(Stack, ConstantBasesHandCase) {
  BasicStackModel<testkit::MeanLearner> m;
  m.feature_count = 2;
  m.base_models = {{2.0}, {4.0}};
  m.meta_columns = {"a", "b"};
  m.meta.coefficients = {0.5, 0.5};
  m.meta.intercept = 0.0;
  m.params.use_features_in_secondary = false;
  EXPECT_EQ(m.predict(std::vector<double>{1, 2}), 3.0);
  EXPECT_EQ(m.predict(std::vector<double>{-7, 0}), 3.0);
}

TEST(Stack, PermutingSpecsKeepsPredictions) {
  const auto d = make_data(4);
  auto p = small_stack(true);
  const auto a = fit_stack(d.x, d.y, p);
  std::swap(p.base_specs[0], p.base_specs[2]);
  const auto b = fit_stack(d.x, d.y, p);
  for (std::size_t i = 0; i < d.x.rows(); ++i) EXPECT_NEAR(a.predict(d.x.row(i)), b.predict(d.x.row(i)), 1e-8);
}

TEST(Stack, ThreadCountDoesNotMatter) {
  const auto d = make_data(5);
  const auto a = fit_stack(d.x, d.y, small_stack(true), {}, 1);
  const auto b = fit_stack(d.x, d.y, small_stack(true), {}, 4);
  EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
}

TEST(Stack, DegenerateElasticNetStack) {
  const auto d = make_data(6);
  StackParams p;
  p.base_specs = {{"enet", ElasticNetParams{}}};
  p.use_features_in_secondary = false;
  p.meta_params.penalty_strength = 0.0;
  const auto model = fit_stack(d.x, d.y, p);
  const auto plan = make_folds(d.x.rows(), p.k_folds, p.global_seed);
  const auto oof = oof_predictions<LearnerSpec>(d.x, d.y, p.base_specs, plan, p.global_seed);
  auto corr = [&](auto&& f) {
    const double n = static_cast<double>(d.y.size());
    double mp = 0, my = 0;
    for (std::size_t i = 0; i < d.y.size(); ++i) {
      mp += f(i);
      my += d.y[i];
    }
    mp /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < d.y.size(); ++i) {
      sxy += (f(i) - mp) * (d.y[i] - my);
      sxx += (f(i) - mp) * (f(i) - mp);
      syy += (d.y[i] - my) * (d.y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
  };
  const double stacked = corr([&](std::size_t i) { return model.predict(d.x.row(i)); });
  const double base = corr([&](std::size_t i) { return oof(i, 0); });
  EXPECT_GE(stacked, base - 1e-12);
}

TEST(Stack, Validation) {
  const auto d = make_data(7, 20);
  auto p = small_stack(true);
  p.base_specs.push_back(p.base_specs[0]);
  EXPECT_THROW(fit_stack(d.x, d.y, p), InputError);  // duplicate name
  p = small_stack(true);
  p.base_specs.clear();
  EXPECT_THROW(fit_stack(d.x, d.y, p), InputError);
  p = small_stack(true);
  p.k_folds = 21;
  EXPECT_THROW(fit_stack(d.x, d.y, p), InputError);
  p.k_folds = 1;
  EXPECT_THROW(fit_stack(d.x, d.y, p), InputError);
}

TEST(Stack, JsonConfigAndModelRoundTrip) {
  const auto config = nlohmann::json::parse(R"({
    "type": "stack",
    "base": [
      {"name": "rf", "type": "forest", "params": {"n_estimators": 10, "max_depth": 6, "max_features": "sqrt"}},
      {"name": "xgb", "type": "boost", "preset": "xgboost", "learning_rate": 0.2},
      {"name": "enet", "type": "elastic_net", "params": {"penalty_strength": 0.01, "l1_ratio": 0.3}}
    ],
    "k_folds": 4,
    "use_features_in_secondary": true,
    "seed": 11
  })");
  const auto p = config.get<StackParams>();
  ASSERT_EQ(p.base_specs.size(), 3u);
  EXPECT_EQ(std::get<ForestParams>(p.base_specs[0].params).n_estimators, 10u);
  EXPECT_EQ(std::get<ForestParams>(p.base_specs[0].params).tree.max_depth, 6);
  EXPECT_EQ(std::get<BoostParams>(p.base_specs[1].params).n_estimators, 10u);
  EXPECT_EQ(std::get<BoostParams>(p.base_specs[1].params).learning_rate, 0.2);
  EXPECT_EQ(std::get<ElasticNetParams>(p.base_specs[2].params).l1_ratio, 0.3);
  EXPECT_EQ(p.k_folds, 4u);
  EXPECT_EQ(p.global_seed, 11u);
  EXPECT_EQ(nlohmann::json(p).get<StackParams>().base_specs, p.base_specs);

  const auto d = make_data(8, 60);
  const auto model = fit_stack(d.x, d.y, p);
  const nlohmann::json j = model;
  const auto back = j.get<StackModel>();
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
  for (std::size_t i = 0; i < d.x.rows(); ++i) EXPECT_EQ(back.predict(d.x.row(i)), model.predict(d.x.row(i)));

  EXPECT_THROW(nlohmann::json::parse(R"({"name":"x","type":"svm"})").get<LearnerSpec>(), InputError);
  EXPECT_THROW(nlohmann::json::parse(R"({"name":"x","type":"boost","preset":"catboost"})").get<LearnerSpec>(),
               InputError);
}
