#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "clvstack/core.hpp"
#include "clvstack/parallel.hpp"
#include "clvstack/tree.hpp"

namespace clvstack {

// ---------------------------------------------------------------------------
// Random forest

struct ForestParams {
  std::size_t n_estimators = 200;
  TreeParams tree{.max_depth = 50, .feature_subsample = FeatureSubsample::sqrt()};
  bool bootstrap = true;
  std::uint64_t seed = 42;

  void validate() const {
    require(n_estimators >= 1, "forest n_estimators must be positive");
    tree.validate();
  }
  bool operator==(const ForestParams&) const = default;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  ForestParams params;
  std::size_t feature_count = 0;

  // Mean of member predictions, summed in tree order.
  double predict(std::span<const double> x) const {
    require(x.size() == feature_count, "forest predict: expected " + std::to_string(feature_count) + " features, got " +
                                           std::to_string(x.size()));
    require(all_finite(x), "forest predict: non-finite feature value");
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict_unchecked(x);
    return sum / static_cast<double>(trees.size());
  }

  bool operator==(const ForestModel&) const = default;
};

inline std::uint64_t forest_tree_seed(std::uint64_t seed, std::size_t tree_index) {
  return mix_seed(seed, tree_index);
}

// Trees are independent: tree t depends only on (seed, t), so the model is
// identical for every thread count.
inline ForestModel fit_forest(const Matrix& x, std::span<const double> y, const ForestParams& params,
                              std::size_t threads = 1) {
  params.validate();
  require(!x.empty(), "fit_forest: no training rows");
  require(y.size() == x.rows(), "fit_forest: target length differs from row count");

  ForestModel model;
  model.params = params;
  model.feature_count = x.cols();
  model.trees.resize(params.n_estimators);
  const std::size_t n = x.rows();
  parallel_for(params.n_estimators, threads, [&](std::size_t t) {
    const std::uint64_t tree_seed = forest_tree_seed(params.seed, t);
    Rng rng(tree_seed);
    std::vector<std::size_t> rows;
    if (params.bootstrap) {
      rows.resize(n);
      for (auto& r : rows) r = rng.below(n);
    } else {
      rows = iota_indices(n);
    }
    model.trees[t] = fit_tree(x, rows, VarianceReduction{y}, params.tree, splitmix64(tree_seed));
  });
  return model;
}

inline double predict_forest(const ForestModel& model, std::span<const double> x) { return model.predict(x); }

// ---------------------------------------------------------------------------
// Gradient boosting, squared-error loss

struct BoostParams {
  std::size_t n_estimators = 100;
  double learning_rate = 0.3;
  int max_depth = 6;
  double lambda_l2 = 1.0;
  double alpha_l1 = 0.0;
  double gamma_complexity = 0.0;
  std::size_t min_samples_leaf = 1;
  std::uint64_t seed = 42;

  // n_estimators = 10; everything else at the reference library defaults.
  static BoostParams xgboost_config() { return {.n_estimators = 10, .learning_rate = 0.3, .max_depth = 6}; }
  static BoostParams lightgbm_config() { return {.n_estimators = 200, .learning_rate = 0.02, .max_depth = 2}; }

  TreeParams tree_params() const {
    return {.max_depth = max_depth,
            .min_samples_leaf = min_samples_leaf,
            .min_gain = 0.0,
            .feature_subsample = FeatureSubsample::all(),
            .lambda_l2 = lambda_l2,
            .alpha_l1 = alpha_l1,
            .gamma_complexity = gamma_complexity};
  }

  void validate() const {
    require(learning_rate > 0.0 && learning_rate <= 1.0, "boost learning_rate must lie in (0, 1]");
    tree_params().validate();
  }
  bool operator==(const BoostParams&) const = default;
};

struct BoostModel {
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
  double learning_rate = 0.3;
  BoostParams params;
  std::size_t feature_count = 0;

  // base_score + learning_rate * sum of the first `rounds` trees.
  double predict_rounds(std::span<const double> x, std::size_t rounds) const {
    require(x.size() == feature_count, "boost predict: expected " + std::to_string(feature_count) + " features, got " +
                                           std::to_string(x.size()));
    require(all_finite(x), "boost predict: non-finite feature value");
    rounds = std::min(rounds, trees.size());
    double sum = 0.0;
    for (std::size_t m = 0; m < rounds; ++m) sum += trees[m].predict_unchecked(x);
    return base_score + learning_rate * sum;
  }

  double predict(std::span<const double> x) const { return predict_rounds(x, trees.size()); }

  bool operator==(const BoostModel&) const = default;
};

inline BoostModel fit_boost(const Matrix& x, std::span<const double> y, const BoostParams& params) {
  params.validate();
  require(!x.empty(), "fit_boost: no training rows");
  require(y.size() == x.rows(), "fit_boost: target length differs from row count");
  require(all_finite(y), "fit_boost: non-finite target");

  const std::size_t n = x.rows();
  BoostModel model;
  model.params = params;
  model.learning_rate = params.learning_rate;
  model.feature_count = x.cols();
  double mean = 0.0;
  for (double v : y) mean += v;
  model.base_score = mean / static_cast<double>(n);

  const TreeParams tree_params = params.tree_params();
  const auto rows = iota_indices(n);
  std::vector<double> pred(n, model.base_score), grad(n), hess(n, 1.0);
  for (std::size_t m = 0; m < params.n_estimators; ++m) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y[i];
    auto tree = fit_tree(x, rows, NewtonGain{grad, hess}, tree_params, mix_seed(params.seed, m));
    if (tree.is_single_leaf() && tree.root().value == 0.0) break;
    for (std::size_t i = 0; i < n; ++i) pred[i] += params.learning_rate * tree.predict_unchecked(x.row(i));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline double predict_boost(const BoostModel& model, std::span<const double> x) { return model.predict(x); }

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const ForestParams& p) {
  j = nlohmann::json{{"n_estimators", p.n_estimators}, {"tree", p.tree}, {"bootstrap", p.bootstrap}, {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, ForestParams& p) {
  ForestParams d;
  p.n_estimators = j.value("n_estimators", d.n_estimators);
  p.tree = d.tree;
  if (j.contains("tree")) p.tree = j.at("tree").get<TreeParams>();
  // Flat shorthand for the common tree settings.
  if (j.contains("max_depth")) p.tree.max_depth = j.at("max_depth").get<int>();
  if (j.contains("min_samples_leaf")) p.tree.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
  if (j.contains("max_features")) p.tree.feature_subsample = j.at("max_features").get<FeatureSubsample>();
  p.bootstrap = j.value("bootstrap", d.bootstrap);
  p.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const BoostParams& p) {
  j = nlohmann::json{{"n_estimators", p.n_estimators},
                     {"learning_rate", p.learning_rate},
                     {"max_depth", p.max_depth},
                     {"lambda_l2", p.lambda_l2},
                     {"alpha_l1", p.alpha_l1},
                     {"gamma_complexity", p.gamma_complexity},
                     {"min_samples_leaf", p.min_samples_leaf},
                     {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, BoostParams& p) {
  BoostParams d;
  p.n_estimators = j.value("n_estimators", d.n_estimators);
  p.learning_rate = j.value("learning_rate", d.learning_rate);
  p.max_depth = j.value("max_depth", d.max_depth);
  p.lambda_l2 = j.value("lambda_l2", d.lambda_l2);
  p.alpha_l1 = j.value("alpha_l1", d.alpha_l1);
  p.gamma_complexity = j.value("gamma_complexity", d.gamma_complexity);
  p.min_samples_leaf = j.value("min_samples_leaf", d.min_samples_leaf);
  p.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const ForestModel& m) {
  j = nlohmann::json{{"params", m.params}, {"feature_count", m.feature_count}, {"trees", m.trees}};
}

inline void from_json(const nlohmann::json& j, ForestModel& m) {
  m.params = j.at("params").get<ForestParams>();
  m.feature_count = j.at("feature_count").get<std::size_t>();
  m.trees = j.at("trees").get<std::vector<RegressionTree>>();
  require(!m.trees.empty(), "forest JSON: no trees");
}

inline void to_json(nlohmann::json& j, const BoostModel& m) {
  j = nlohmann::json{{"params", m.params},
                     {"feature_count", m.feature_count},
                     {"base_score", m.base_score},
                     {"learning_rate", m.learning_rate},
                     {"trees", m.trees}};
}

inline void from_json(const nlohmann::json& j, BoostModel& m) {
  m.params = j.at("params").get<BoostParams>();
  m.feature_count = j.at("feature_count").get<std::size_t>();
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.trees = j.at("trees").get<std::vector<RegressionTree>>();
}

}  // namespace clvstack
