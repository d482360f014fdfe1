#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "clvstack/core.hpp"

namespace clvstack {

enum class SubsampleMode { kAll, kSqrt, kFraction };

// Features considered at each node.
struct FeatureSubsample {
  SubsampleMode mode = SubsampleMode::kAll;
  double fraction = 1.0;

  static FeatureSubsample all() { return {}; }
  static FeatureSubsample sqrt() { return {SubsampleMode::kSqrt, 1.0}; }
  static FeatureSubsample of_fraction(double f) { return {SubsampleMode::kFraction, f}; }

  // ceil(sqrt(d)) for kSqrt, ceil(f * d) for kFraction, never below 1.
  std::size_t count(std::size_t d) const {
    if (d == 0) return 0;
    switch (mode) {
      case SubsampleMode::kAll:
        return d;
      case SubsampleMode::kSqrt: {
        auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
        while (k * k < d) ++k;
        while (k > 1 && (k - 1) * (k - 1) >= d) --k;
        return std::clamp<std::size_t>(k, 1, d);
      }
      case SubsampleMode::kFraction:
        return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(d))), 1, d);
    }
    return d;
  }

  bool operator==(const FeatureSubsample&) const = default;
};

struct TreeParams {
  int max_depth = 6;
  std::size_t min_samples_leaf = 1;
  double min_gain = 0.0;
  FeatureSubsample feature_subsample;
  double lambda_l2 = 0.0;
  double alpha_l1 = 0.0;
  double gamma_complexity = 0.0;

  void validate() const {
    require(max_depth >= 0, "max_depth must be non-negative");
    require(min_samples_leaf >= 1, "min_samples_leaf must be at least 1");
    require(min_gain >= 0.0, "min_gain must be non-negative");
    require(lambda_l2 >= 0.0 && alpha_l1 >= 0.0 && gamma_complexity >= 0.0,
            "lambda_l2, alpha_l1 and gamma_complexity must be non-negative");
    if (feature_subsample.mode == SubsampleMode::kFraction)
      require(feature_subsample.fraction > 0.0 && feature_subsample.fraction <= 1.0,
              "feature_subsample fraction must lie in (0, 1]");
  }

  bool operator==(const TreeParams&) const = default;
};

// Split on squared-error reduction of the targets; leaves hold target means.
struct VarianceReduction {
  std::span<const double> targets;
};

// Split on the regularised second-order structure score; leaves hold the
// optimal Newton weight.
struct NewtonGain {
  std::span<const double> gradients;
  std::span<const double> hessians;
};

using SplitObjective = std::variant<VarianceReduction, NewtonGain>;

// sign(g) * max(|g| - alpha, 0)
inline double soft_threshold(double g, double alpha) noexcept {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

inline double newton_leaf_weight(double sum_grad, double sum_hess, double lambda_l2, double alpha_l1) noexcept {
  return -soft_threshold(sum_grad, alpha_l1) / (sum_hess + lambda_l2);
}

// 1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - (G_L+G_R)^2/(H_L+H_R+l)] - gamma
inline double newton_gain(double grad_left, double hess_left, double grad_right, double hess_right, double lambda_l2,
                          double gamma_complexity) noexcept {
  const double g = grad_left + grad_right;
  const double h = hess_left + hess_right;
  return 0.5 * (grad_left * grad_left / (hess_left + lambda_l2) + grad_right * grad_right / (hess_right + lambda_l2) -
                g * g / (h + lambda_l2)) -
         gamma_complexity;
}

// newton_gain with each gradient sum soft-thresholded by alpha_l1, which is
// the structure score of the L1-penalised leaf weight.
inline double newton_gain_l1(double grad_left, double hess_left, double grad_right, double hess_right,
                             double lambda_l2, double alpha_l1, double gamma_complexity) noexcept {
  if (alpha_l1 == 0.0) return newton_gain(grad_left, hess_left, grad_right, hess_right, lambda_l2, gamma_complexity);
  auto score = [&](double g, double h) {
    const double t = soft_threshold(g, alpha_l1);
    return t * t / (h + lambda_l2);
  };
  return 0.5 * (score(grad_left, hess_left) + score(grad_right, hess_right) -
                score(grad_left + grad_right, hess_left + hess_right)) -
         gamma_complexity;
}

// Flat node storage; children are indices into the owning tree. For an
// internal node `value` is the value it would have as a leaf.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
  double split_gain = 0.0;
  double cover = 0.0;       // row count (variance) or hessian sum (Newton)
  std::size_t samples = 0;  // training rows reaching the node, with multiplicity

  bool is_leaf() const noexcept { return left < 0; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<TreeNode> nodes, std::size_t feature_count, TreeParams params)
      : nodes_(std::move(nodes)), feature_count_(feature_count), params_(params) {}

  static RegressionTree leaf(double value, std::size_t feature_count, double cover = 0.0) {
    TreeNode n;
    n.value = value;
    n.cover = cover;
    return RegressionTree({n}, feature_count, {});
  }

  // x[feature] <= threshold routes left.
  double predict(std::span<const double> x) const {
    require(x.size() == feature_count_, "predict: expected " + std::to_string(feature_count_) + " features, got " +
                                            std::to_string(x.size()));
    require(all_finite(x), "predict: non-finite feature value");
    return predict_unchecked(x);
  }

  double predict_unchecked(std::span<const double> x) const noexcept {
    std::int32_t i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes_[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)].value;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t feature_count() const noexcept { return feature_count_; }
  const TreeParams& params() const noexcept { return params_; }

  int depth() const { return nodes_.empty() ? 0 : depth_from(0); }
  std::size_t internal_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](auto& n) { return !n.is_leaf(); }));
  }
  bool is_single_leaf() const noexcept { return nodes_.size() == 1; }

  bool operator==(const RegressionTree&) const = default;

 private:
  int depth_from(std::int32_t i) const {
    const auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }

  std::vector<TreeNode> nodes_;
  std::size_t feature_count_ = 0;
  TreeParams params_;
};

namespace detail {

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

// Gains within this relative distance of the best are ties, resolved by
// lowest feature index and then lowest threshold.
inline constexpr double kTieTolerance = 1e-12;

inline std::optional<SplitCandidate> pick_split(const std::vector<SplitCandidate>& candidates) {
  if (candidates.empty()) return std::nullopt;
  double best = candidates.front().gain;
  for (const auto& c : candidates) best = std::max(best, c.gain);
  const double floor = best - kTieTolerance * std::max(1.0, std::abs(best));
  for (const auto& c : candidates)
    if (c.gain >= floor) return c;
  return std::nullopt;
}

// Midpoint strictly below `hi` so that lo routes left and hi routes right.
inline double midpoint(double lo, double hi) noexcept {
  const double mid = 0.5 * (lo + hi);
  return (mid < hi && mid >= lo) ? mid : lo;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const SplitObjective& objective, const TreeParams& params, std::uint64_t seed)
      : x_(x), params_(params), rng_(seed) {
    if (const auto* v = std::get_if<VarianceReduction>(&objective)) {
      primary_ = v->targets;
    } else {
      const auto& n = std::get<NewtonGain>(objective);
      newton_ = true;
      primary_ = n.gradients;
      hessians_ = n.hessians;
    }
  }

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  struct Totals {
    std::size_t count = 0;
    double sum = 0.0;   // targets or gradients
    double hess = 0.0;  // hessian sum (Newton only)
  };

  Totals totals(const std::vector<std::size_t>& rows) const {
    Totals t;
    t.count = rows.size();
    for (auto r : rows) {
      t.sum += primary_[r];
      if (newton_) t.hess += hessians_[r];
    }
    return t;
  }

  std::int32_t grow(std::vector<std::size_t> rows, int depth) {
    const Totals t = totals(rows);
    TreeNode node;
    node.samples = t.count;
    if (newton_) {
      node.value = newton_leaf_weight(t.sum, t.hess, params_.lambda_l2, params_.alpha_l1);
      node.cover = t.hess;
    } else {
      node.value = t.sum / static_cast<double>(t.count);
      node.cover = static_cast<double>(t.count);
    }
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);

    if (depth >= params_.max_depth || t.count < 2 * params_.min_samples_leaf) return index;

    const std::size_t d = x_.cols();
    const std::size_t k = params_.feature_subsample.count(d);
    const auto features = k >= d ? iota_indices(d) : rng_.sample_without_replacement(d, k);

    auto split = find_split(rows, features, t);
    if (!split || !(split->gain > params_.min_gain)) return index;
    if (!(split->gain + (newton_ ? params_.gamma_complexity : 0.0) > rounding_floor(rows, t))) return index;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_(r, split->feature) <= split->threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const auto l = grow(std::move(left), depth + 1);
    const auto r = grow(std::move(right), depth + 1);
    auto& n = nodes_[static_cast<std::size_t>(index)];
    n.feature = static_cast<std::int32_t>(split->feature);
    n.threshold = split->threshold;
    n.split_gain = split->gain;
    n.left = l;
    n.right = r;
    return index;
  }

  // Gains this small relative to the node's own spread are rounding noise,
  // e.g. the centred values of a constant target whose mean is inexact.
  double rounding_floor(const std::vector<std::size_t>& rows, const Totals& t) const {
    double spread = 0.0;
    if (newton_) {
      for (auto r : rows) spread += primary_[r] * primary_[r] / hessians_[r];
    } else {
      const double mean = t.sum / static_cast<double>(t.count);
      for (auto r : rows) spread += (primary_[r] - mean) * (primary_[r] - mean);
    }
    return kTieTolerance * spread;
  }

  std::optional<SplitCandidate> find_split(const std::vector<std::size_t>& rows,
                                           const std::vector<std::size_t>& features, const Totals& t) const {
    const std::size_t n = rows.size();
    const std::size_t min_leaf = params_.min_samples_leaf;
    // Centring targets keeps the variance gain free of cancellation error.
    const double mean = newton_ ? 0.0 : t.sum / static_cast<double>(n);

    double total = t.sum;
    if (!newton_) {
      total = 0.0;
      for (auto r : rows) total += primary_[r] - mean;
    }

    std::vector<std::pair<double, std::size_t>> order(n);
    std::vector<SplitCandidate> candidates;
    for (auto f : features) {
      for (std::size_t i = 0; i < n; ++i) order[i] = {x_(rows[i], f), rows[i]};
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;

      double left_sum = 0.0, left_hess = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto r = order[i].second;
        if (newton_) {
          left_sum += primary_[r];
          left_hess += hessians_[r];
        } else {
          left_sum += primary_[r] - mean;
        }
        const std::size_t left_n = i + 1;
        const std::size_t right_n = n - left_n;
        if (order[i].first == order[i + 1].first || left_n < min_leaf || right_n < min_leaf) continue;

        double gain;
        if (newton_) {
          gain = newton_gain_l1(left_sum, left_hess, total - left_sum, t.hess - left_hess, params_.lambda_l2,
                                params_.alpha_l1, params_.gamma_complexity);
        } else {
          const double right_sum = total - left_sum;
          gain = left_sum * left_sum / static_cast<double>(left_n) +
                 right_sum * right_sum / static_cast<double>(right_n) - total * total / static_cast<double>(n);
        }
        candidates.push_back({f, midpoint(order[i].first, order[i + 1].first), gain});
      }
    }
    return pick_split(candidates);
  }

  const Matrix& x_;
  TreeParams params_;
  Rng rng_;
  bool newton_ = false;
  std::span<const double> primary_;
  std::span<const double> hessians_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

// Greedy depth-first CART growth over the given training rows (repeats
// allowed, as produced by bootstrap sampling).
inline RegressionTree fit_tree(const Matrix& x, std::span<const std::size_t> rows, const SplitObjective& objective,
                               const TreeParams& params, std::uint64_t seed) {
  params.validate();
  require(!rows.empty() && !x.empty(), "fit_tree: no training rows");
  require(all_finite(x.values()), "fit_tree: non-finite value in feature matrix");
  std::visit(
      [&](const auto& obj) {
        using T = std::decay_t<decltype(obj)>;
        if constexpr (std::is_same_v<T, VarianceReduction>) {
          require(obj.targets.size() == x.rows(), "fit_tree: target length differs from row count");
          require(all_finite(obj.targets), "fit_tree: non-finite target");
        } else {
          require(obj.gradients.size() == x.rows() && obj.hessians.size() == x.rows(),
                  "fit_tree: gradient/hessian length differs from row count");
          require(all_finite(obj.gradients) && all_finite(obj.hessians), "fit_tree: non-finite gradient or hessian");
          require(std::all_of(obj.hessians.begin(), obj.hessians.end(), [](double h) { return h > 0.0; }),
                  "fit_tree: hessians must be strictly positive");
        }
      },
      objective);
  for (auto r : rows) require(r < x.rows(), "fit_tree: row index out of range");

  detail::TreeBuilder builder(x, objective, params, seed);
  return RegressionTree(builder.build({rows.begin(), rows.end()}), x.cols(), params);
}

inline RegressionTree fit_tree(const Matrix& x, const SplitObjective& objective, const TreeParams& params,
                               std::uint64_t seed) {
  const auto rows = iota_indices(x.rows());
  return fit_tree(x, rows, objective, params, seed);
}

inline double predict_tree(const RegressionTree& tree, std::span<const double> x) { return tree.predict(x); }

// JSON: subsample mode as a string; trees as nested node objects.

inline void to_json(nlohmann::json& j, const FeatureSubsample& s) {
  switch (s.mode) {
    case SubsampleMode::kAll: j = "all"; break;
    case SubsampleMode::kSqrt: j = "sqrt"; break;
    case SubsampleMode::kFraction: j = s.fraction; break;
  }
}

inline void from_json(const nlohmann::json& j, FeatureSubsample& s) {
  if (j.is_number()) {
    s = FeatureSubsample::of_fraction(j.get<double>());
  } else if (j == "all") {
    s = FeatureSubsample::all();
  } else if (j == "sqrt") {
    s = FeatureSubsample::sqrt();
  } else {
    throw InputError("feature_subsample must be \"all\", \"sqrt\" or a fraction");
  }
}

inline void to_json(nlohmann::json& j, const TreeParams& p) {
  j = nlohmann::json{{"max_depth", p.max_depth},
                     {"min_samples_leaf", p.min_samples_leaf},
                     {"min_gain", p.min_gain},
                     {"feature_subsample", p.feature_subsample},
                     {"lambda_l2", p.lambda_l2},
                     {"alpha_l1", p.alpha_l1},
                     {"gamma_complexity", p.gamma_complexity}};
}

inline void from_json(const nlohmann::json& j, TreeParams& p) {
  TreeParams d;
  p.max_depth = j.value("max_depth", d.max_depth);
  p.min_samples_leaf = j.value("min_samples_leaf", d.min_samples_leaf);
  p.min_gain = j.value("min_gain", d.min_gain);
  p.feature_subsample = j.contains("feature_subsample") ? j.at("feature_subsample").get<FeatureSubsample>() : d.feature_subsample;
  p.lambda_l2 = j.value("lambda_l2", d.lambda_l2);
  p.alpha_l1 = j.value("alpha_l1", d.alpha_l1);
  p.gamma_complexity = j.value("gamma_complexity", d.gamma_complexity);
}

namespace detail {

inline nlohmann::json node_to_json(const std::vector<TreeNode>& nodes, std::int32_t i) {
  const auto& n = nodes[static_cast<std::size_t>(i)];
  if (n.is_leaf()) return {{"leaf", n.value}, {"cover", n.cover}, {"samples", n.samples}};
  return {{"feature", n.feature},          {"threshold", n.threshold}, {"gain", n.split_gain},
          {"cover", n.cover},              {"samples", n.samples},     {"value", n.value},
          {"left", node_to_json(nodes, n.left)}, {"right", node_to_json(nodes, n.right)}};
}

inline std::int32_t node_from_json(const nlohmann::json& j, std::vector<TreeNode>& nodes, std::size_t feature_count) {
  TreeNode n;
  n.cover = j.at("cover").get<double>();
  n.samples = j.value("samples", std::size_t{0});
  const auto index = static_cast<std::int32_t>(nodes.size());
  if (j.contains("leaf")) {
    n.value = j.at("leaf").get<double>();
    nodes.push_back(n);
    return index;
  }
  n.feature = j.at("feature").get<std::int32_t>();
  require(n.feature >= 0 && static_cast<std::size_t>(n.feature) < feature_count, "tree JSON: feature index out of range");
  n.threshold = j.at("threshold").get<double>();
  n.split_gain = j.at("gain").get<double>();
  n.value = j.value("value", 0.0);
  nodes.push_back(n);
  const auto l = node_from_json(j.at("left"), nodes, feature_count);
  const auto r = node_from_json(j.at("right"), nodes, feature_count);
  nodes[static_cast<std::size_t>(index)].left = l;
  nodes[static_cast<std::size_t>(index)].right = r;
  return index;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const RegressionTree& t) {
  j = nlohmann::json{{"feature_count", t.feature_count()},
                     {"params", t.params()},
                     {"root", detail::node_to_json(t.nodes(), 0)}};
}

inline void from_json(const nlohmann::json& j, RegressionTree& t) {
  const auto feature_count = j.at("feature_count").get<std::size_t>();
  std::vector<TreeNode> nodes;
  detail::node_from_json(j.at("root"), nodes, feature_count);
  t = RegressionTree(std::move(nodes), feature_count, j.at("params").get<TreeParams>());
}

}  // namespace clvstack
