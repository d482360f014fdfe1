#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "clvstack/core.hpp"
#include "clvstack/ensemble.hpp"
#include "clvstack/linear.hpp"
#include "clvstack/stack.hpp"

namespace clvstack {

inline constexpr std::string_view kModelFormat = "clvstack-model";
inline constexpr int kModelFormatVersion = 1;

// A persisted model of any kind, with the feature names it was trained on.
struct SavedModel {
  std::string name;
  std::vector<std::string> feature_names;
  std::variant<ForestModel, BoostModel, LinearModel, StackModel> model;

  std::string_view kind() const {
    switch (model.index()) {
      case 0: return "forest";
      case 1: return "boost";
      case 2: return "elastic_net";
      default: return "stack";
    }
  }

  std::size_t feature_count() const {
    return std::visit(
        [](const auto& m) -> std::size_t {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LinearModel>)
            return m.coefficients.size();
          else
            return m.feature_count;
        },
        model);
  }

  double predict(std::span<const double> x) const {
    return std::visit([&](const auto& m) { return m.predict(x); }, model);
  }

  std::vector<double> predict_all(const Matrix& x) const {
    require(x.cols() == feature_count(), "model expects " + std::to_string(feature_count()) +
                                             " features but the data has " + std::to_string(x.cols()));
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
    return out;
  }
};

inline SavedModel saved_model_from_base(std::string name, std::vector<std::string> feature_names, BaseModel base) {
  SavedModel m{std::move(name), std::move(feature_names), {}};
  std::visit([&](auto&& fitted) { m.model = std::move(fitted); }, std::move(base.fitted));
  return m;
}

inline nlohmann::json model_to_json(const SavedModel& m) {
  nlohmann::json body;
  std::visit([&](const auto& model) { body = model; }, m.model);
  return {{"format", kModelFormat},
          {"version", kModelFormatVersion},
          {"kind", m.kind()},
          {"name", m.name},
          {"feature_names", m.feature_names},
          {"model", std::move(body)}};
}

inline SavedModel model_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.value("format", std::string{}) == kModelFormat, "not a clvstack model file");
  require(j.value("version", 0) == kModelFormatVersion, "unsupported model format version");
  SavedModel m;
  m.name = j.value("name", std::string{});
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  const auto kind = j.at("kind").get<std::string>();
  const auto& body = j.at("model");
  if (kind == "stack")
    m.model = body.get<StackModel>();
  else
    std::visit([&](auto&& fitted) { m.model = std::move(fitted); }, base_model_from_json(body, kind).fitted);
  require(m.feature_names.size() == m.feature_count(), "model file: feature name count mismatch");
  return m;
}

inline void save_model(std::ostream& out, const SavedModel& m) { out << model_to_json(m).dump() << '\n'; }

inline SavedModel load_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace clvstack
