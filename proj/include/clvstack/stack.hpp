#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "clvstack/core.hpp"
#include "clvstack/ensemble.hpp"
#include "clvstack/linear.hpp"
#include "clvstack/parallel.hpp"

namespace clvstack {

// ---------------------------------------------------------------------------
// Built-in base learners

using LearnerParams = std::variant<ForestParams, BoostParams, ElasticNetParams>;

struct BaseModel {
  std::variant<ForestModel, BoostModel, LinearModel> fitted;

  double predict(std::span<const double> x) const {
    return std::visit([&](const auto& m) { return m.predict(x); }, fitted);
  }

  std::size_t feature_count() const {
    return std::visit(
        [](const auto& m) -> std::size_t {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LinearModel>)
            return m.coefficients.size();
          else
            return m.feature_count;
        },
        fitted);
  }

  bool operator==(const BaseModel&) const = default;
};

inline std::string_view learner_kind(const LearnerParams& params) {
  switch (params.index()) {
    case 0: return "forest";
    case 1: return "boost";
    default: return "elastic_net";
  }
}

struct LearnerSpec {
  std::string name;
  LearnerParams params;

  // `seed` replaces any seed stored in the parameters.
  BaseModel fit(const Matrix& x, std::span<const double> y, std::uint64_t seed, std::size_t threads = 1) const {
    return std::visit(
        [&](auto p) -> BaseModel {
          using P = decltype(p);
          if constexpr (std::is_same_v<P, ForestParams>) {
            p.seed = seed;
            return {fit_forest(x, y, p, threads)};
          } else if constexpr (std::is_same_v<P, BoostParams>) {
            p.seed = seed;
            return {fit_boost(x, y, p)};
          } else {
            return {fit_elastic_net(x, y, p)};
          }
        },
        params);
  }

  std::string_view kind() const { return learner_kind(params); }
  bool operator==(const LearnerSpec&) const = default;
};

// Anything with a `name` member and fit(x, y, seed) returning a predictor.
template <class L>
concept StackLearner = requires(const L& learner, const Matrix& x, std::span<const double> y, std::uint64_t seed) {
  { learner.name } -> std::convertible_to<std::string>;
  { learner.fit(x, y, seed).predict(std::span<const double>{}) } -> std::convertible_to<double>;
};

template <StackLearner L>
using FittedModel = decltype(std::declval<const L&>().fit(std::declval<const Matrix&>(),
                                                          std::declval<std::span<const double>>(), std::uint64_t{}));

// ---------------------------------------------------------------------------
// Folds

struct FoldPlan {
  std::vector<std::size_t> assignment;  // row -> fold id in [0, k)
  std::size_t k = 0;

  std::vector<std::size_t> rows_in(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> rows_outside(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] != fold) out.push_back(i);
    return out;
  }
};

// Seeded shuffle of 0..n-1, cut into k contiguous blocks whose sizes differ
// by at most one (the first n % k blocks take the extra row).
inline FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  require(k >= 2, "k_folds must be at least 2");
  require(k <= n, "k_folds (" + std::to_string(k) + ") exceeds row count (" + std::to_string(n) + ")");
  auto order = iota_indices(n);
  Rng rng(mix_seed(seed, fnv1a("folds")));
  rng.shuffle(std::span<std::size_t>(order));

  FoldPlan plan;
  plan.k = k;
  plan.assignment.assign(n, 0);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) plan.assignment[order[pos++]] = f;
  }
  return plan;
}

inline constexpr std::uint64_t kFullRefit = std::numeric_limits<std::uint64_t>::max();

// Seed for fitting learner `name` on fold `fold` (kFullRefit for the
// full-data refit). Depends on the name, not the learner's position.
inline std::uint64_t learner_seed(std::uint64_t global_seed, std::string_view name, std::uint64_t fold) {
  return mix_seed(mix_seed(global_seed, fnv1a(name)), fold);
}

// Column s, row i: prediction for row i from learner s fitted on every fold
// except row i's own.
template <StackLearner L>
Matrix oof_predictions(const Matrix& x, std::span<const double> y, std::span<const L> learners, const FoldPlan& plan,
                       std::uint64_t global_seed, std::size_t threads = 1) {
  require(plan.assignment.size() == x.rows() && y.size() == x.rows(), "oof_predictions: fold plan does not match data");
  const std::size_t n = x.rows(), s_count = learners.size(), k = plan.k;
  Matrix out(n, s_count, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::vector<std::size_t>> train(k), held(k);
  for (std::size_t f = 0; f < k; ++f) {
    train[f] = plan.rows_outside(f);
    held[f] = plan.rows_in(f);
  }

  parallel_for(s_count * k, threads, [&](std::size_t task) {
    const std::size_t s = task / k, f = task % k;
    const Matrix x_train = x.select_rows(train[f]);
    const auto y_train = gather<double>(y, train[f]);
    const auto model = learners[s].fit(x_train, y_train, learner_seed(global_seed, learners[s].name, f));
    for (auto i : held[f]) out(i, s) = model.predict(x.row(i));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Stacked model

// Meta-learner default. The stopping tolerance is far tighter than the
// standalone default because base-prediction columns are nearly collinear,
// where a 1e-8 coefficient step can still leave predictions 1e-7 from the
// optimum. The design is only a handful of columns wide, so this is cheap.
inline ElasticNetParams default_meta_params() {
  ElasticNetParams p;
  p.penalty_strength = 1e-3;
  p.l1_ratio = 0.5;
  p.max_sweeps = 100000;
  p.tolerance = 1e-12;
  return p;
}

template <StackLearner L>
struct BasicStackParams {
  std::vector<L> base_specs;
  ElasticNetParams meta_params = default_meta_params();
  std::size_t k_folds = 5;
  bool use_features_in_secondary = true;
  std::uint64_t global_seed = 42;

  void validate() const {
    require(!base_specs.empty(), "stack needs at least one base learner");
    std::set<std::string> names;
    for (const auto& s : base_specs)
      require(names.insert(std::string(s.name)).second, "duplicate base learner name '" + std::string(s.name) + "'");
    require(k_folds >= 2, "k_folds must be at least 2");
    meta_params.validate();
  }
};

template <StackLearner L>
struct BasicStackModel {
  using Model = FittedModel<L>;

  BasicStackParams<L> params;
  std::vector<Model> base_models;  // full-data refits, in spec order
  LinearModel meta;
  std::vector<std::string> meta_columns;  // base names, then feature names when passthrough
  std::size_t feature_count = 0;

  std::vector<double> meta_row(std::span<const double> x) const {
    require(x.size() == feature_count, "stack predict: expected " + std::to_string(feature_count) + " features, got " +
                                           std::to_string(x.size()));
    std::vector<double> row;
    row.reserve(meta_columns.size());
    for (const auto& m : base_models) row.push_back(m.predict(x));
    if (params.use_features_in_secondary) row.insert(row.end(), x.begin(), x.end());
    return row;
  }

  double predict(std::span<const double> x) const { return meta.predict(meta_row(x)); }
};

template <StackLearner L>
BasicStackModel<L> fit_stack(const Matrix& x, std::span<const double> y, const BasicStackParams<L>& params,
                             std::span<const std::string> feature_names = {}, std::size_t threads = 1) {
  params.validate();
  require(y.size() == x.rows(), "fit_stack: target length differs from row count");
  require(x.rows() >= params.k_folds, "fit_stack: fewer rows than folds");
  require(feature_names.empty() || feature_names.size() == x.cols(), "fit_stack: feature name count mismatch");

  BasicStackModel<L> model;
  model.params = params;
  model.feature_count = x.cols();
  for (const auto& s : params.base_specs) model.meta_columns.emplace_back(s.name);
  if (params.use_features_in_secondary) {
    for (std::size_t j = 0; j < x.cols(); ++j)
      model.meta_columns.push_back(feature_names.empty() ? "x" + std::to_string(j) : feature_names[j]);
  }

  const auto plan = make_folds(x.rows(), params.k_folds, params.global_seed);
  const Matrix oof = oof_predictions<L>(x, y, params.base_specs, plan, params.global_seed, threads);
  const Matrix design = params.use_features_in_secondary ? oof.hstack(x) : oof;
  model.meta = fit_elastic_net(design, y, params.meta_params);

  std::vector<std::optional<typename BasicStackModel<L>::Model>> refits(params.base_specs.size());
  parallel_for(refits.size(), threads, [&](std::size_t s) {
    const auto& spec = params.base_specs[s];
    refits[s].emplace(spec.fit(x, y, learner_seed(params.global_seed, spec.name, kFullRefit)));
  });
  for (auto& r : refits) model.base_models.push_back(std::move(*r));
  return model;
}

template <StackLearner L>
double predict_stack(const BasicStackModel<L>& model, std::span<const double> x) {
  return model.predict(x);
}

using StackParams = BasicStackParams<LearnerSpec>;
using StackModel = BasicStackModel<LearnerSpec>;

// ---------------------------------------------------------------------------
// JSON for the built-in learners

inline void to_json(nlohmann::json& j, const LearnerSpec& s) {
  j = nlohmann::json{{"name", s.name}, {"type", s.kind()}};
  std::visit([&](const auto& p) { j["params"] = p; }, s.params);
}

// {"name", "type": forest|boost|elastic_net, "preset"?: xgboost|lightgbm,
//  "params"?: {...}}; parameters may also sit directly on the object.
inline void from_json(const nlohmann::json& j, LearnerSpec& s) {
  s.name = j.at("name").get<std::string>();
  require(!s.name.empty(), "learner name must not be empty");
  const auto type = j.at("type").get<std::string>();
  const nlohmann::json& p = j.contains("params") ? j.at("params") : j;
  if (type == "forest" || type == "random_forest") {
    s.params = p.get<ForestParams>();
  } else if (type == "boost" || type == "gradient_boosting") {
    const auto preset = j.value("preset", std::string{});
    BoostParams base;
    if (preset == "xgboost")
      base = BoostParams::xgboost_config();
    else if (preset == "lightgbm")
      base = BoostParams::lightgbm_config();
    else
      require(preset.empty(), "unknown boost preset '" + preset + "'");
    nlohmann::json merged = base;
    for (auto it = p.begin(); it != p.end(); ++it)
      if (merged.contains(it.key())) merged[it.key()] = it.value();
    s.params = merged.get<BoostParams>();
  } else if (type == "elastic_net" || type == "elasticnet") {
    s.params = p.get<ElasticNetParams>();
  } else {
    throw InputError("unknown learner type '" + type + "'");
  }
}

inline void to_json(nlohmann::json& j, const BaseModel& m) {
  std::visit([&](const auto& fitted) { j = fitted; }, m.fitted);
}

inline BaseModel base_model_from_json(const nlohmann::json& j, std::string_view kind) {
  if (kind == "forest") return {j.get<ForestModel>()};
  if (kind == "boost") return {j.get<BoostModel>()};
  if (kind == "elastic_net") return {j.get<LinearModel>()};
  throw InputError("unknown model kind '" + std::string(kind) + "'");
}

inline void to_json(nlohmann::json& j, const StackParams& p) {
  j = nlohmann::json{{"type", "stack"},
                     {"base", p.base_specs},
                     {"meta", p.meta_params},
                     {"k_folds", p.k_folds},
                     {"use_features_in_secondary", p.use_features_in_secondary},
                     {"seed", p.global_seed}};
}

inline void from_json(const nlohmann::json& j, StackParams& p) {
  StackParams d;
  p.base_specs = j.at("base").get<std::vector<LearnerSpec>>();
  p.meta_params = d.meta_params;
  if (j.contains("meta")) from_json(j.at("meta"), p.meta_params);
  p.k_folds = j.value("k_folds", d.k_folds);
  p.use_features_in_secondary = j.value("use_features_in_secondary", d.use_features_in_secondary);
  p.global_seed = j.value("seed", d.global_seed);
}

inline void to_json(nlohmann::json& j, const StackModel& m) {
  nlohmann::json base = nlohmann::json::array();
  for (std::size_t s = 0; s < m.base_models.size(); ++s) {
    base.push_back({{"name", m.params.base_specs[s].name},
                    {"type", m.params.base_specs[s].kind()},
                    {"model", m.base_models[s]}});
  }
  j = nlohmann::json{{"params", m.params},
                     {"feature_count", m.feature_count},
                     {"meta_columns", m.meta_columns},
                     {"meta", m.meta},
                     {"base_models", std::move(base)}};
}

inline void from_json(const nlohmann::json& j, StackModel& m) {
  m.params = j.at("params").get<StackParams>();
  m.feature_count = j.at("feature_count").get<std::size_t>();
  m.meta_columns = j.at("meta_columns").get<std::vector<std::string>>();
  m.meta = j.at("meta").get<LinearModel>();
  m.base_models.clear();
  for (const auto& b : j.at("base_models")) m.base_models.push_back(base_model_from_json(b.at("model"), b.at("type").get<std::string>()));
  require(m.base_models.size() == m.params.base_specs.size(), "stack JSON: base model count mismatch");
  require(m.meta.coefficients.size() == m.meta_columns.size(), "stack JSON: meta width mismatch");
}

}  // namespace clvstack
