#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "clvstack/core.hpp"
#include "clvstack/tree.hpp"

namespace clvstack {

struct ElasticNetParams {
  double penalty_strength = 1e-3;  // alpha
  double l1_ratio = 0.5;           // rho
  std::size_t max_sweeps = 1000;
  double tolerance = 1e-8;  // max absolute coefficient change per sweep
  bool standardize = true;

  void validate() const {
    require(penalty_strength >= 0.0 && std::isfinite(penalty_strength), "penalty_strength must be non-negative");
    require(l1_ratio >= 0.0 && l1_ratio <= 1.0, "l1_ratio must lie in [0, 1]");
    require(max_sweeps >= 1, "max_sweeps must be positive");
    require(tolerance > 0.0, "tolerance must be positive");
  }
  bool operator==(const ElasticNetParams&) const = default;
};

struct LinearModel {
  std::vector<double> coefficients;  // original feature scale
  double intercept = 0.0;
  std::vector<double> column_means;
  std::vector<double> column_scales;  // 0 marks a constant column

  double predict(std::span<const double> x) const {
    require(x.size() == coefficients.size(), "linear predict: expected " + std::to_string(coefficients.size()) +
                                                 " features, got " + std::to_string(x.size()));
    double out = intercept;
    for (std::size_t j = 0; j < x.size(); ++j) out += coefficients[j] * x[j];
    return out;
  }

  // Coefficients on the centred/scaled columns the solver worked with.
  std::vector<double> standardized_coefficients() const {
    std::vector<double> out(coefficients.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = coefficients[j] * column_scales[j];
    return out;
  }

  bool operator==(const LinearModel&) const = default;
};

struct ElasticNetTrace {
  std::vector<double> objective;  // before the first sweep, then after each sweep
  std::size_t sweeps = 0;
  bool converged = false;
};

// Minimises (1/2n)|y - Xb - c|^2 + a*r*|b|_1 + a*(1-r)/2*|b|^2 by cyclic
// coordinate descent on centred (and, by default, unit-variance) columns.
inline LinearModel fit_elastic_net(const Matrix& x, std::span<const double> y, const ElasticNetParams& params,
                                   ElasticNetTrace* trace = nullptr) {
  params.validate();
  require(x.rows() >= 1 && x.cols() >= 1, "fit_elastic_net: need at least one row and one column");
  require(y.size() == x.rows(), "fit_elastic_net: target length differs from row count");
  require(all_finite(x.values()) && all_finite(y), "fit_elastic_net: non-finite input");

  const std::size_t n = x.rows(), d = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  LinearModel model;
  model.coefficients.assign(d, 0.0);
  model.column_means.assign(d, 0.0);
  model.column_scales.assign(d, 0.0);

  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean *= inv_n;

  std::vector<std::vector<double>> z(d, std::vector<double>(n));
  std::vector<double> zz(d, 0.0);  // |z_j|^2 / n
  for (std::size_t j = 0; j < d; ++j) {
    bool constant = true;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean += x(i, j);
      constant = constant && x(i, j) == x(0, j);
    }
    mean *= inv_n;
    model.column_means[j] = mean;
    if (constant) continue;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    var *= inv_n;
    const double scale = params.standardize ? std::sqrt(var) : 1.0;
    model.column_scales[j] = scale;
    for (std::size_t i = 0; i < n; ++i) z[j][i] = (x(i, j) - mean) / scale;
    for (double v : z[j]) zz[j] += v * v;
    zz[j] *= inv_n;
  }

  const double l1 = params.penalty_strength * params.l1_ratio;
  const double l2 = params.penalty_strength * (1.0 - params.l1_ratio);
  std::vector<double> beta(d, 0.0);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - y_mean;

  auto objective = [&] {
    double rss = 0.0, a1 = 0.0, a2 = 0.0;
    for (double r : residual) rss += r * r;
    for (double b : beta) {
      a1 += std::abs(b);
      a2 += b * b;
    }
    return 0.5 * inv_n * rss + l1 * a1 + 0.5 * l2 * a2;
  };
  if (trace) trace->objective.push_back(objective());

  std::size_t sweep = 0;
  bool converged = false;
  while (sweep < params.max_sweeps) {
    ++sweep;
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (model.column_scales[j] == 0.0) continue;
      const auto& zj = z[j];
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += zj[i] * residual[i];
      rho = rho * inv_n + zz[j] * beta[j];
      const double updated = soft_threshold(rho, l1) / (zz[j] + l2);
      const double delta = updated - beta[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= zj[i] * delta;
        beta[j] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    if (trace) trace->objective.push_back(objective());
    if (max_change < params.tolerance) {
      converged = true;
      break;
    }
  }
  if (trace) {
    trace->sweeps = sweep;
    trace->converged = converged;
  }

  model.intercept = y_mean;
  for (std::size_t j = 0; j < d; ++j) {
    if (model.column_scales[j] == 0.0) continue;
    model.coefficients[j] = beta[j] / model.column_scales[j];
    model.intercept -= model.coefficients[j] * model.column_means[j];
  }
  return model;
}

inline double predict_linear(const LinearModel& model, std::span<const double> x) { return model.predict(x); }

inline void to_json(nlohmann::json& j, const ElasticNetParams& p) {
  j = nlohmann::json{{"penalty_strength", p.penalty_strength},
                     {"l1_ratio", p.l1_ratio},
                     {"max_sweeps", p.max_sweeps},
                     {"tolerance", p.tolerance},
                     {"standardize", p.standardize}};
}

// Keys absent from `j` keep the values already in `p`.
inline void from_json(const nlohmann::json& j, ElasticNetParams& p) {
  const ElasticNetParams d = p;
  p.penalty_strength = j.value("penalty_strength", d.penalty_strength);
  p.l1_ratio = j.value("l1_ratio", d.l1_ratio);
  p.max_sweeps = j.value("max_sweeps", d.max_sweeps);
  p.tolerance = j.value("tolerance", d.tolerance);
  p.standardize = j.value("standardize", d.standardize);
}

inline void to_json(nlohmann::json& j, const LinearModel& m) {
  j = nlohmann::json{{"coefficients", m.coefficients},
                     {"intercept", m.intercept},
                     {"column_means", m.column_means},
                     {"column_scales", m.column_scales}};
}

inline void from_json(const nlohmann::json& j, LinearModel& m) {
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  m.intercept = j.at("intercept").get<double>();
  m.column_means = j.at("column_means").get<std::vector<double>>();
  m.column_scales = j.at("column_scales").get<std::vector<double>>();
  require(m.column_means.size() == m.coefficients.size() && m.column_scales.size() == m.coefficients.size(),
          "linear model JSON: inconsistent vector lengths");
}

}  // namespace clvstack
