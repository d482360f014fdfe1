#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clvstack/ensemble.hpp"
#include "clvstack/features.hpp"
#include "clvstack/ingest.hpp"
#include "clvstack/linear.hpp"
#include "clvstack/model_io.hpp"
#include "clvstack/report.hpp"
#include "clvstack/stack.hpp"

namespace clvstack {

// End-to-end reproduction run: clean, featurize at the cutoff, split the
// customers 80/20 at random, fit every learner on the 80% and score the 20%.

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  double test_fraction = 0.2;
  std::int64_t horizon_days = 90;
  std::int64_t recent_window_days = 90;
  std::optional<Timestamp> cutoff;  // default_cutoff() when absent
};

struct ExperimentRow {
  std::string method;
  double rmse = 0.0;
  double mae = 0.0;
  std::string status = "OK";
};

struct ExperimentResult {
  CleanReport clean_report;
  DatasetStats stats;
  Timestamp cutoff;
  std::size_t n_customers_featurized = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<ExperimentRow> rows;
  std::map<std::string, ImportanceReport> importance;  // tree learners only
  std::map<std::string, SavedModel> models;

  const ExperimentRow* row(const std::string& method) const {
    for (const auto& r : rows)
      if (r.method == method) return &r;
    return nullptr;
  }
};

namespace experiment_names {
inline const std::string kRandomForest = "RandomForest";
inline const std::string kXGBoost = "XGBoost";
inline const std::string kLightGBM = "LightGBM";
inline const std::string kElasticNet = "ElasticNet";
inline const std::string kStacked = "Stacked Regressor";
inline const std::string kStackedNoPassthrough = "Stacked Regressor (no passthrough)";
}  // namespace experiment_names

inline std::vector<LearnerSpec> experiment_learners() {
  using namespace experiment_names;
  return {{kRandomForest, ForestParams{}},
          {kXGBoost, BoostParams::xgboost_config()},
          {kLightGBM, BoostParams::lightgbm_config()},
          {kElasticNet, ElasticNetParams{}}};
}

inline StackParams experiment_stack_params(std::uint64_t seed, bool passthrough) {
  using namespace experiment_names;
  StackParams p;
  p.base_specs = {{kRandomForest, ForestParams{}}, {kXGBoost, BoostParams::xgboost_config()}, {kElasticNet, ElasticNetParams{}}};
  p.use_features_in_secondary = passthrough;
  p.global_seed = seed;
  return p;
}

// Seeded random split of row indices into (train, test).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(std::size_t n,
                                                                                      double test_fraction,
                                                                                      std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, "test fraction must lie in (0, 1)");
  auto order = iota_indices(n);
  Rng rng(mix_seed(seed, fnv1a("train_test_split")));
  rng.shuffle(std::span<std::size_t>(order));
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n > 1 ? n - 1 : 1);
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(test)};
}

inline ExperimentResult run_experiment(const ParseResult& parsed, const ExperimentConfig& config) {
  using namespace experiment_names;
  ExperimentResult result;
  auto cleaned = clean(parsed);
  result.clean_report = cleaned.report;
  const auto ledger = build_ledger(cleaned.transactions);
  result.stats = dataset_stats(ledger, cleaned.transactions);

  WindowSpec window{config.cutoff.value_or(default_cutoff(ledger, config.horizon_days)), config.horizon_days,
                    config.recent_window_days};
  result.cutoff = window.cutoff;
  auto rows = featurize(split_windows(ledger, window), window);
  require(!rows.empty(), "no customers have purchases before the cutoff");
  const DesignMatrix data = to_matrix(std::move(rows));
  result.n_customers_featurized = data.rows();
  require(data.rows() >= 10, "too few customers for an experiment");

  const auto [train_idx, test_idx] = train_test_split(data.rows(), config.test_fraction, config.seed);
  const DesignMatrix train = data.select_rows(train_idx);
  const DesignMatrix test = data.select_rows(test_idx);
  result.n_train = train.rows();
  result.n_test = test.rows();

  auto score = [&](const std::string& method, auto&& fit) {
    ExperimentRow row{method};
    try {
      SavedModel model = fit();
      const auto predictions = model.predict_all(test.x);
      row.rmse = rmse(predictions, test.target);
      row.mae = mae(predictions, test.target);
      result.models.emplace(method, std::move(model));
    } catch (const std::exception& e) {
      row.status = std::string("ERROR: ") + e.what();
    }
    result.rows.push_back(std::move(row));
  };

  for (const auto& spec : experiment_learners()) {
    score(spec.name, [&] {
      const auto seed = learner_seed(config.seed, spec.name, kFullRefit);
      return saved_model_from_base(spec.name, train.feature_names, spec.fit(train.x, train.target, seed, config.threads));
    });
    if (auto it = result.models.find(spec.name); it != result.models.end()) {
      if (const auto* forest = std::get_if<ForestModel>(&it->second.model))
        result.importance.emplace(spec.name, compute_importance(*forest, train.feature_names));
      else if (const auto* boost = std::get_if<BoostModel>(&it->second.model))
        result.importance.emplace(spec.name, compute_importance(*boost, train.feature_names));
    }
  }
  for (bool passthrough : {true, false}) {
    const auto& name = passthrough ? kStacked : kStackedNoPassthrough;
    score(name, [&] {
      auto stack = fit_stack(train.x, train.target, experiment_stack_params(config.seed, passthrough),
                             train.feature_names, config.threads);
      return SavedModel{name, train.feature_names, std::move(stack)};
    });
  }
  return result;
}

inline void write_table5_csv(std::ostream& out, const ExperimentResult& r) {
  out << "method,rmse,mae,status\n";
  for (const auto& row : r.rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", row.rmse, row.mae);
    out << csv::quote(row.method) << ',' << buf << ',' << csv::quote(row.status) << '\n';
  }
}

inline std::string top_feature(const ImportanceReport& report, ImportanceType type) {
  const auto ranked = rank_features(report, type);
  return ranked.empty() ? std::string{} : ranked.front();
}

inline nlohmann::json experiment_metadata(const ExperimentResult& r, const ExperimentConfig& config) {
  nlohmann::json importance_tops = nlohmann::json::object();
  for (const auto& [name, report] : r.importance) {
    importance_tops[name] = {{"top_by_gain", top_feature(report, ImportanceType::kGain)},
                             {"top_by_weight", top_feature(report, ImportanceType::kWeight)}};
  }
  return {{"seed", config.seed},
          {"protocol",
           {{"split", "random customer split, seeded"},
            {"test_fraction", config.test_fraction},
            {"train_rows", r.n_train},
            {"test_rows", r.n_test},
            {"cutoff", r.cutoff.to_string()},
            {"target_horizon_days", config.horizon_days},
            {"recent_window_days", config.recent_window_days}}},
          {"clean_report", r.clean_report},
          {"dataset_stats", r.stats},
          {"featurized_customers", r.n_customers_featurized},
          {"importance_top_features", importance_tops}};
}

}  // namespace clvstack
