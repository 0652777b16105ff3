#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rdforest/domain.hpp"
#include "rdforest/random.hpp"

namespace rdforest {

enum class SplitRule { kCart, kRidgeResidual };

/// Which subsample-exponent lower bound to use.
enum class ForestVariant { kRf, kLlf };

SplitRule parse_split_rule(std::string_view name);
std::string_view split_rule_name(SplitRule rule);

inline constexpr double kDefaultRidgeLambda = 0.1;

struct ForestConfig {
  std::size_t num_trees = 2000;
  std::size_t mtry = 1;
  std::size_t min_node_size = 5;
  double alpha = 0.05;             // minimum child share of a node's split half
  double honesty_fraction = 0.5;   // share of each subsample used to place splits
  double c_scale = 0.4;            // subsample = c * ceil(n^beta)
  SplitRule split_rule = SplitRule::kCart;
  std::optional<double> ridge_lambda = kDefaultRidgeLambda;  // nullopt: auto
  bool standardize_penalty = true;
  std::size_t ci_group_size = 2;
  std::uint64_t seed = 42;

  /// Throws ConfigError on out-of-range values or a mismatched mtry.
  void validate(std::size_t dim) const;
};

/// Lower bound on the subsample exponent.
double beta_min(std::size_t d, std::size_t mtry, double alpha, ForestVariant variant);

/// min(n - 1, round(c * ceil(n^beta_min))), rounding half away from zero.
std::size_t subsample_size(std::size_t n, std::size_t d, std::size_t mtry, double alpha, double c,
                           ForestVariant variant);

/// Flat tree node. Internal nodes route x[feature] <= threshold to `left`.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::uint32_t leaf_begin = 0;  // estimation members in Tree::leaf_members
  std::uint32_t leaf_end = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;               // nodes[0] is the root
  std::vector<std::uint32_t> leaf_members;   // estimation-half rows, grouped by leaf
  std::vector<std::uint32_t> split_half;     // rows used to place splits
  std::vector<std::uint32_t> estimation_half;

  std::uint32_t find_leaf(std::span<const double> x) const;
  std::span<const std::uint32_t> members(std::uint32_t node) const {
    return {leaf_members.data() + nodes[node].leaf_begin, nodes[node].leaf_end - nodes[node].leaf_begin};
  }
  std::size_t leaf_count() const;
};

/// Grows one honest tree on `subsample` (rows of `data`). The first
/// round(honesty_fraction * s) rows place splits; the rest populate leaves.
Tree grow_tree(const Dataset& data, std::span<const std::uint32_t> subsample,
               const ForestConfig& config, Rng& rng);

/// Forest of B trees organized in B / ci_group_size little bags. Immutable
/// after fit; holds a shared reference to its training data.
class FittedForest {
 public:
  FittedForest(std::shared_ptr<const Dataset> data, ForestConfig config, ForestVariant variant,
               std::size_t subsample, std::vector<Tree> trees);

  const Dataset& data() const noexcept { return *data_; }
  const ForestConfig& config() const noexcept { return config_; }
  ForestVariant variant() const noexcept { return variant_; }
  std::size_t subsample() const noexcept { return subsample_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }
  std::size_t num_groups() const noexcept { return trees_.size() / config_.ci_group_size; }

 private:
  std::shared_ptr<const Dataset> data_;
  ForestConfig config_;
  ForestVariant variant_;
  std::size_t subsample_;
  std::vector<Tree> trees_;
};

/// OpenMP kernel: little bags are grown in parallel. Output is independent of
/// the thread count.
FittedForest fit_forest(std::shared_ptr<const Dataset> data, const ForestConfig& config,
                        ForestVariant variant);

/// Serial reference for fit_forest; bit-identical trees.
FittedForest fit_forest_serial(std::shared_ptr<const Dataset> data, const ForestConfig& config,
                               ForestVariant variant);

/// W_i = (1/B') sum_b 1{i in L_b(x)} / |L_b(x)| over trees with a non-empty
/// leaf at x. Throws PredictionError if no tree qualifies.
std::vector<double> forest_weights(const FittedForest& forest, std::span<const double> x);

/// sum_i W_i Y_i.
double rf_predict(const FittedForest& forest, std::span<const double> x);

/// Average over trees of the leaf means (the tree-average form of rf_predict).
double rf_predict_tree_average(const FittedForest& forest, std::span<const double> x);

/// Forest-weighted ridge local linear fit at x:
///   min sum W_i (Y_i - b0 - b1'(X_i - x))^2 + sum_j pen_j b1_j^2
/// with pen_j = lambda * sum_i W_i (X_ij - x_j)^2 when the penalty is
/// standardized and pen_j = lambda otherwise. Returns b0.
double llf_predict(const FittedForest& forest, std::span<const double> x, double lambda);

/// Same with the forest's configured lambda (auto-selected when unset).
double llf_predict(const FittedForest& forest, std::span<const double> x);

/// Lambda chosen from {0.01, 0.1, 1, 10} by forest-weighted leave-one-out
/// error of the local fit at x.
double select_ridge_lambda(const FittedForest& forest, std::span<const double> x);

enum class Predictor { kRf, kLlf };

/// Prediction and per-tree values at one point. For rf the tree values are
/// leaf means and average to the estimate; for llf they are leaf averages of
/// zeta_i * r_i (ridge residuals) and only their spread is meaningful.
struct PointPrediction {
  double estimate = 0.0;
  std::vector<double> tree_values;  // one per tree with a non-empty leaf, in tree order
  std::vector<std::size_t> tree_index;
};

PointPrediction predict_with_trees(const FittedForest& forest, std::span<const double> x,
                                   Predictor predictor);

/// Bootstrap-of-little-bags variance from per-tree values grouped in
/// consecutive runs of `group_size`:
///   max(floor, V_between - V_within / group_size).
/// Groups with a missing tree are dropped. Throws ConfigError if fewer than
/// two complete groups remain.
double little_bags_variance_from_trees(std::span<const double> tree_values,
                                       std::span<const std::size_t> tree_index,
                                       std::size_t group_size, double floor);

double little_bags_variance(const FittedForest& forest, std::span<const double> x,
                            Predictor predictor);

struct ForestEstimate {
  double estimate = 0.0;
  double variance = 0.0;
};

/// Point prediction and little-bags variance in one pass. The variance floor
/// is 1e-12 times the squared outcome scale.
ForestEstimate predict_with_variance(const FittedForest& forest, std::span<const double> x,
                                     Predictor predictor);

}  // namespace rdforest
