#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clvstack/core.hpp"
#include "clvstack/ensemble.hpp"
#include "clvstack/tree.hpp"

namespace clvstack {

namespace detail {
inline void check_metric_inputs(std::span<const double> predictions, std::span<const double> actuals) {
  require(!predictions.empty(), "metric: empty input");
  require(predictions.size() == actuals.size(), "metric: prediction/actual length mismatch (" +
                                                    std::to_string(predictions.size()) + " vs " +
                                                    std::to_string(actuals.size()) + ")");
}
}  // namespace detail

inline double rmse(std::span<const double> predictions, std::span<const double> actuals) {
  detail::check_metric_inputs(predictions, actuals);
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - actuals[i];
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

inline double mae(std::span<const double> predictions, std::span<const double> actuals) {
  detail::check_metric_inputs(predictions, actuals);
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) sum += std::abs(predictions[i] - actuals[i]);
  return sum / static_cast<double>(predictions.size());
}

struct EvalReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
  std::vector<double> residuals;  // prediction - actual; optional detail
};

inline EvalReport evaluate(std::span<const double> predictions, std::span<const double> actuals,
                           bool keep_residuals = false) {
  EvalReport r{rmse(predictions, actuals), mae(predictions, actuals), predictions.size(), {}};
  if (keep_residuals) {
    r.residuals.resize(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) r.residuals[i] = predictions[i] - actuals[i];
  }
  return r;
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"rmse", r.rmse}, {"mae", r.mae}, {"n", r.n}};
  if (!r.residuals.empty()) j["residuals"] = r.residuals;
}

// ---------------------------------------------------------------------------
// Split-based feature importance

struct FeatureImportance {
  std::string feature;
  std::size_t weight = 0;  // number of splits on the feature
  double gain = 0.0;       // total_gain / weight
  double cover = 0.0;      // total_cover / weight
  double total_gain = 0.0;
  double total_cover = 0.0;
};

struct ImportanceReport {
  std::vector<FeatureImportance> features;  // in feature-index order
};

enum class ImportanceType { kWeight, kGain, kCover, kTotalGain, kTotalCover };

inline ImportanceType parse_importance_type(std::string_view name) {
  if (name == "weight") return ImportanceType::kWeight;
  if (name == "gain") return ImportanceType::kGain;
  if (name == "cover") return ImportanceType::kCover;
  if (name == "total_gain") return ImportanceType::kTotalGain;
  if (name == "total_cover") return ImportanceType::kTotalCover;
  throw InputError("unknown importance type '" + std::string(name) + "'");
}

inline double importance_value(const FeatureImportance& f, ImportanceType type) {
  switch (type) {
    case ImportanceType::kWeight: return static_cast<double>(f.weight);
    case ImportanceType::kGain: return f.gain;
    case ImportanceType::kCover: return f.cover;
    case ImportanceType::kTotalGain: return f.total_gain;
    case ImportanceType::kTotalCover: return f.total_cover;
  }
  return 0.0;
}

inline ImportanceReport compute_importance(std::span<const RegressionTree> trees,
                                           std::span<const std::string> feature_names) {
  ImportanceReport report;
  for (const auto& name : feature_names) report.features.push_back({name});
  for (const auto& tree : trees) {
    require(tree.feature_count() == feature_names.size(),
            "importance: model has " + std::to_string(tree.feature_count()) + " features but " +
                std::to_string(feature_names.size()) + " names were given");
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) continue;
      auto& f = report.features[static_cast<std::size_t>(node.feature)];
      f.weight += 1;
      f.total_gain += node.split_gain;
      f.total_cover += node.cover;
    }
  }
  for (auto& f : report.features) {
    if (f.weight == 0) continue;
    f.gain = f.total_gain / static_cast<double>(f.weight);
    f.cover = f.total_cover / static_cast<double>(f.weight);
  }
  return report;
}

inline ImportanceReport compute_importance(const ForestModel& model, std::span<const std::string> feature_names) {
  require(model.feature_count == feature_names.size(), "importance: feature name count mismatch");
  return compute_importance(std::span<const RegressionTree>(model.trees), feature_names);
}

inline ImportanceReport compute_importance(const BoostModel& model, std::span<const std::string> feature_names) {
  require(model.feature_count == feature_names.size(), "importance: feature name count mismatch");
  return compute_importance(std::span<const RegressionTree>(model.trees), feature_names);
}

// Descending by the indicator; ties by feature name ascending.
inline std::vector<std::string> rank_features(const ImportanceReport& report, ImportanceType type) {
  auto order = report.features;
  std::stable_sort(order.begin(), order.end(), [&](const FeatureImportance& a, const FeatureImportance& b) {
    const double va = importance_value(a, type), vb = importance_value(b, type);
    if (va != vb) return va > vb;
    return a.feature < b.feature;
  });
  std::vector<std::string> names;
  for (const auto& f : order) names.push_back(f.feature);
  return names;
}

inline void to_json(nlohmann::json& j, const ImportanceReport& r) {
  j = nlohmann::json::array();
  for (const auto& f : r.features) {
    j.push_back({{"feature", f.feature},
                 {"weight", f.weight},
                 {"gain", f.gain},
                 {"cover", f.cover},
                 {"total_gain", f.total_gain},
                 {"total_cover", f.total_cover}});
  }
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_importance_csv(std::ostream& out, const ImportanceReport& r) {
  out << "feature,weight,gain,cover,total_gain,total_cover\n";
  for (const auto& f : r.features) {
    out << f.feature << ',' << f.weight << ',' << format_number(f.gain) << ',' << format_number(f.cover) << ','
        << format_number(f.total_gain) << ',' << format_number(f.total_cover) << '\n';
  }
}

}  // namespace clvstack
