#include "rdforest/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "rdforest/error.hpp"

namespace rdforest {

SplitRule parse_split_rule(std::string_view name) {
  if (name == "cart") return SplitRule::kCart;
  if (name == "ridge_residual" || name == "ridge-residual") return SplitRule::kRidgeResidual;
  throw ConfigError("unknown split rule '" + std::string(name) + "'");
}

std::string_view split_rule_name(SplitRule rule) {
  return rule == SplitRule::kCart ? "cart" : "ridge_residual";
}

void ForestConfig::validate(std::size_t dim) const {
  if (num_trees == 0) throw ConfigError("num_trees must be positive");
  if (ci_group_size < 2) throw ConfigError("ci_group_size must be at least 2");
  if (num_trees < ci_group_size || num_trees % ci_group_size != 0) {
    throw ConfigError("num_trees must be a positive multiple of ci_group_size");
  }
  if (mtry < 1 || mtry > dim) throw ConfigError("mtry must lie in [1, d]");
  if (min_node_size < 1) throw ConfigError("min_node_size must be at least 1");
  if (!(alpha > 0.0 && alpha <= 0.5)) throw ConfigError("alpha must lie in (0, 0.5]");
  if (!(honesty_fraction > 0.0 && honesty_fraction < 1.0)) {
    throw ConfigError("honesty_fraction must lie in (0, 1)");
  }
  if (!(c_scale >= 0.05 && c_scale <= 0.5)) throw ConfigError("c_scale must lie in [0.05, 0.5]");
  if (ridge_lambda && !(*ridge_lambda >= 0.0 && std::isfinite(*ridge_lambda))) {
    throw ConfigError("ridge_lambda must be non-negative");
  }
}

double beta_min(std::size_t d, std::size_t mtry, double alpha, ForestVariant variant) {
  if (d < 1 || mtry < 1 || mtry > d) throw ConfigError("beta_min: need 1 <= mtry <= d");
  if (!(alpha > 0.0 && alpha <= 0.5)) throw ConfigError("beta_min: alpha must lie in (0, 0.5]");
  const double dd = static_cast<double>(d), m = static_cast<double>(mtry);
  const double log_ratio = std::log(alpha) / std::log(1.0 - alpha);
  if (variant == ForestVariant::kRf) return 1.0 / (1.0 + m / (dd * log_ratio));
  return 1.0 - 1.0 / (1.0 + dd / (1.3 * m) * log_ratio);
}

std::size_t subsample_size(std::size_t n, std::size_t d, std::size_t mtry, double alpha, double c,
                           ForestVariant variant) {
  if (n < 2) throw ConfigError("subsample_size: n must be at least 2");
  if (!(c >= 0.05 && c <= 0.5)) throw ConfigError("subsample_size: c must lie in [0.05, 0.5]");
  const double beta = beta_min(d, mtry, alpha, variant);
  const double base = std::ceil(std::pow(static_cast<double>(n), beta));
  const auto s = static_cast<std::size_t>(std::llround(c * base));
  return std::min(n - 1, s);
}

// ---------------------------------------------------------------------------
// Trees

std::uint32_t Tree::find_leaf(std::span<const double> x) const {
  std::uint32_t node = 0;
  while (!nodes[node].is_leaf()) {
    const TreeNode& nd = nodes[node];
    node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return node;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& nd) { return nd.is_leaf(); }));
}

namespace {

struct SplitCandidate {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct Scratch {
  std::vector<double> response;
  std::vector<std::pair<double, double>> sorted_i;
  std::vector<double> sorted_j;
  std::vector<std::uint32_t> features;
};

// Residuals of a ridge fit of y on the node's split-half scores (intercept
// unpenalized, handled by centering).
void ridge_residuals(const Dataset& data, std::span<const std::uint32_t> rows,
                     const ForestConfig& config, std::vector<double>& out) {
  const std::size_t m = rows.size();
  const std::size_t d = data.dim();
  const double lambda = config.ridge_lambda.value_or(kDefaultRidgeLambda);
  double ybar = 0.0;
  for (auto r : rows) ybar += data.y(r);
  ybar /= static_cast<double>(m);
  Eigen::VectorXd xbar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (auto r : rows) {
    for (std::size_t j = 0; j < d; ++j) xbar(static_cast<Eigen::Index>(j)) += data.x(r, j);
  }
  xbar /= static_cast<double>(m);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  Eigen::VectorXd z(static_cast<Eigen::Index>(d));
  for (auto r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      z(static_cast<Eigen::Index>(j)) = data.x(r, j) - xbar(static_cast<Eigen::Index>(j));
    }
    a.noalias() += z * z.transpose();
    b += z * (data.y(r) - ybar);
  }
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    const double diag = a(j, j);
    a(j, j) += config.standardize_penalty ? lambda * diag : lambda;
  }
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
    coef = ldlt.solve(b);
  }
  out.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    double fit = ybar;
    for (std::size_t j = 0; j < d; ++j) {
      fit += coef(static_cast<Eigen::Index>(j)) * (data.x(rows[k], j) - xbar(static_cast<Eigen::Index>(j)));
    }
    out[k] = data.y(rows[k]) - fit;
  }
}

SplitCandidate find_split(const Dataset& data, std::span<const std::uint32_t> split_rows,
                          std::span<const std::uint32_t> est_rows, const ForestConfig& config,
                          Rng& rng, Scratch& scratch) {
  SplitCandidate best;
  const std::size_t m_i = split_rows.size();
  const std::size_t m_j = est_rows.size();
  const std::size_t min_node = config.min_node_size;
  if (m_i < 2 || m_j < 2 * min_node) return best;

  auto& resp = scratch.response;
  if (config.split_rule == SplitRule::kRidgeResidual) {
    ridge_residuals(data, split_rows, config, resp);
  } else {
    resp.resize(m_i);
    for (std::size_t k = 0; k < m_i; ++k) resp[k] = data.y(split_rows[k]);
  }
  // Centering keeps the gain of a constant response at rounding level.
  const double mean = std::accumulate(resp.begin(), resp.end(), 0.0) / static_cast<double>(m_i);
  double total_ss = 0.0;
  for (double& r : resp) {
    r -= mean;
    total_ss += r * r;
  }
  const double total = std::accumulate(resp.begin(), resp.end(), 0.0);
  const double parent_term = total * total / static_cast<double>(m_i);
  const double min_gain = std::max(1e-12 * total_ss, std::numeric_limits<double>::min());
  const auto min_child =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(config.alpha * static_cast<double>(m_i))));
  if (2 * min_child > m_i) return best;

  // Features drawn without replacement, in draw order.
  const std::size_t d = data.dim();
  auto& feats = scratch.features;
  feats.resize(d);
  std::iota(feats.begin(), feats.end(), 0U);
  for (std::size_t k = 0; k < config.mtry; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.index(d - k));
    std::swap(feats[k], feats[pick]);
  }

  auto& si = scratch.sorted_i;
  auto& sj = scratch.sorted_j;
  double best_gain = min_gain;
  for (std::size_t fk = 0; fk < config.mtry; ++fk) {
    const std::uint32_t f = feats[fk];
    si.resize(m_i);
    for (std::size_t k = 0; k < m_i; ++k) si[k] = {data.x(split_rows[k], f), resp[k]};
    std::sort(si.begin(), si.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    sj.resize(m_j);
    for (std::size_t k = 0; k < m_j; ++k) sj[k] = data.x(est_rows[k], f);
    std::sort(sj.begin(), sj.end());

    double left_sum = 0.0;
    std::size_t j_left = 0;
    for (std::size_t k = 1; k < m_i; ++k) {
      left_sum += si[k - 1].second;
      const std::size_t n_left = k, n_right = m_i - k;
      if (n_right < min_child) break;
      if (n_left < min_child) continue;
      const double lo = si[k - 1].first, hi = si[k].first;
      if (!(lo < hi)) continue;
      double threshold = lo + 0.5 * (hi - lo);
      if (!(threshold < hi)) threshold = lo;
      while (j_left < m_j && sj[j_left] <= threshold) ++j_left;
      if (j_left < min_node) continue;
      if (m_j - j_left < min_node) break;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                          right_sum * right_sum / static_cast<double>(n_right) - parent_term;
      if (gain > best_gain) {
        best_gain = gain;
        best = {static_cast<std::int32_t>(f), threshold, gain};
      }
    }
  }
  return best;
}

}  // namespace

Tree grow_tree(const Dataset& data, std::span<const std::uint32_t> subsample,
               const ForestConfig& config, Rng& rng) {
  const std::size_t s = subsample.size();
  if (s < 2 || s < 2 * config.min_node_size) {
    throw ConfigError("grow_tree: subsample of " + std::to_string(s) +
                      " rows is smaller than 2 * min_node_size");
  }
  auto n_split = static_cast<std::size_t>(std::llround(config.honesty_fraction * static_cast<double>(s)));
  n_split = std::clamp<std::size_t>(n_split, 1, s - 1);

  Tree tree;
  tree.split_half.assign(subsample.begin(), subsample.begin() + static_cast<std::ptrdiff_t>(n_split));
  tree.estimation_half.assign(subsample.begin() + static_cast<std::ptrdiff_t>(n_split), subsample.end());
  std::vector<std::uint32_t> split_rows = tree.split_half;
  std::vector<std::uint32_t> est_rows = tree.estimation_half;
  tree.leaf_members.reserve(est_rows.size());

  struct Pending {
    std::uint32_t node;
    std::size_t i_begin, i_end, j_begin, j_end;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, split_rows.size(), 0, est_rows.size()});
  Scratch scratch;

  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    std::span<std::uint32_t> i_rows(split_rows.data() + p.i_begin, p.i_end - p.i_begin);
    std::span<std::uint32_t> j_rows(est_rows.data() + p.j_begin, p.j_end - p.j_begin);
    const SplitCandidate split = find_split(data, i_rows, j_rows, config, rng, scratch);
    if (split.feature < 0) {
      TreeNode& leaf = tree.nodes[p.node];
      leaf.leaf_begin = static_cast<std::uint32_t>(tree.leaf_members.size());
      tree.leaf_members.insert(tree.leaf_members.end(), j_rows.begin(), j_rows.end());
      leaf.leaf_end = static_cast<std::uint32_t>(tree.leaf_members.size());
      continue;
    }
    const auto f = static_cast<std::size_t>(split.feature);
    auto goes_left = [&](std::uint32_t r) { return data.x(r, f) <= split.threshold; };
    const auto i_mid = static_cast<std::size_t>(
        std::stable_partition(i_rows.begin(), i_rows.end(), goes_left) - i_rows.begin());
    const auto j_mid = static_cast<std::size_t>(
        std::stable_partition(j_rows.begin(), j_rows.end(), goes_left) - j_rows.begin());

    const auto left = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& nd = tree.nodes[p.node];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = left;
    nd.right = left + 1;
    stack.push_back({left + 1, p.i_begin + i_mid, p.i_end, p.j_begin + j_mid, p.j_end});
    stack.push_back({left, p.i_begin, p.i_begin + i_mid, p.j_begin, p.j_begin + j_mid});
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Forest fitting

FittedForest::FittedForest(std::shared_ptr<const Dataset> data, ForestConfig config,
                           ForestVariant variant, std::size_t subsample, std::vector<Tree> trees)
    : data_(std::move(data)),
      config_(std::move(config)),
      variant_(variant),
      subsample_(subsample),
      trees_(std::move(trees)) {}

namespace {

constexpr std::uint64_t kGroupStream = 0x6c6974746c65ULL;  // "little"
constexpr std::uint64_t kTreeStream = 0x74726565ULL;       // "tree"

struct FitPlan {
  std::size_t subsample;
  std::size_t half;
  std::vector<std::uint32_t> all_rows;
};

FitPlan plan_fit(const Dataset& data, const ForestConfig& config, ForestVariant variant) {
  config.validate(data.dim());
  const std::size_t n = data.size();
  if (n < 2) throw ConfigError("forest needs at least two observations");
  FitPlan plan;
  plan.half = n / 2;
  plan.subsample = std::min(
      subsample_size(n, data.dim(), config.mtry, config.alpha, config.c_scale, variant),
      plan.half);
  if (plan.subsample < 2 * config.min_node_size || plan.subsample < 2) {
    throw ConfigError("forest subsample of " + std::to_string(plan.subsample) +
                      " rows is smaller than 2 * min_node_size (n = " + std::to_string(n) + ")");
  }
  plan.all_rows.resize(n);
  std::iota(plan.all_rows.begin(), plan.all_rows.end(), 0U);
  return plan;
}

void grow_group(const Dataset& data, const ForestConfig& config, const FitPlan& plan,
                std::size_t group, std::vector<Tree>& trees) {
  Rng group_rng(derive_seed(config.seed, {kGroupStream, group}));
  const auto half = group_rng.sample_without_replacement(plan.all_rows, plan.half);
  for (std::size_t t = 0; t < config.ci_group_size; ++t) {
    const std::size_t b = group * config.ci_group_size + t;
    Rng tree_rng(derive_seed(config.seed, {kTreeStream, b}));
    const auto sub = tree_rng.sample_without_replacement(half, plan.subsample);
    trees[b] = grow_tree(data, sub, config, tree_rng);
  }
}

}  // namespace

FittedForest fit_forest(std::shared_ptr<const Dataset> data, const ForestConfig& config,
                        ForestVariant variant) {
  const FitPlan plan = plan_fit(*data, config, variant);
  std::vector<Tree> trees(config.num_trees);
  const auto groups = static_cast<std::ptrdiff_t>(config.num_trees / config.ci_group_size);
  const Dataset& ref = *data;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t g = 0; g < groups; ++g) {
    grow_group(ref, config, plan, static_cast<std::size_t>(g), trees);
  }
  return FittedForest(std::move(data), config, variant, plan.subsample, std::move(trees));
}

FittedForest fit_forest_serial(std::shared_ptr<const Dataset> data, const ForestConfig& config,
                               ForestVariant variant) {
  const FitPlan plan = plan_fit(*data, config, variant);
  std::vector<Tree> trees(config.num_trees);
  for (std::size_t g = 0; g < config.num_trees / config.ci_group_size; ++g) {
    grow_group(*data, config, plan, g, trees);
  }
  return FittedForest(std::move(data), config, variant, plan.subsample, std::move(trees));
}

// ---------------------------------------------------------------------------
// Prediction

namespace {

struct LeafHits {
  std::vector<std::span<const std::uint32_t>> leaves;  // non-empty leaves only
  std::vector<std::size_t> tree_index;
};

LeafHits collect_leaves(const FittedForest& forest, std::span<const double> x) {
  if (x.size() != forest.data().dim()) throw DimensionError("prediction point has the wrong dimension");
  LeafHits hits;
  hits.leaves.reserve(forest.trees().size());
  hits.tree_index.reserve(forest.trees().size());
  for (std::size_t b = 0; b < forest.trees().size(); ++b) {
    const Tree& tree = forest.trees()[b];
    auto members = tree.members(tree.find_leaf(x));
    if (members.empty()) continue;
    hits.leaves.push_back(members);
    hits.tree_index.push_back(b);
  }
  if (hits.leaves.empty()) throw PredictionError("every tree has an empty leaf at the query point");
  return hits;
}

std::vector<double> weights_from(const LeafHits& hits, std::size_t n) {
  std::vector<double> w(n, 0.0);
  const double inv_trees = 1.0 / static_cast<double>(hits.leaves.size());
  for (const auto& leaf : hits.leaves) {
    const double share = inv_trees / static_cast<double>(leaf.size());
    for (auto i : leaf) w[i] += share;
  }
  return w;
}

// Local linear system at x with forest weights. `row` is e1' (A + P)^{-1};
// zeta_i = row . z_i gives the estimate as sum_i W_i zeta_i Y_i.
struct LocalLinear {
  std::vector<std::uint32_t> support;
  std::vector<double> weight;
  Eigen::MatrixXd z;  // support x (d + 1)
  Eigen::MatrixXd a;  // unpenalized Z'WZ
};

LocalLinear build_local(const FittedForest& forest, std::span<const double> x,
                        const std::vector<double>& w) {
  const Dataset& data = forest.data();
  const std::size_t d = data.dim();
  LocalLinear ll;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) {
      ll.support.push_back(static_cast<std::uint32_t>(i));
      ll.weight.push_back(w[i]);
    }
  }
  const auto m = static_cast<Eigen::Index>(ll.support.size());
  const auto p = static_cast<Eigen::Index>(d + 1);
  ll.z.resize(m, p);
  for (Eigen::Index k = 0; k < m; ++k) {
    ll.z(k, 0) = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      ll.z(k, static_cast<Eigen::Index>(j + 1)) = data.x(ll.support[static_cast<std::size_t>(k)], j) - x[j];
    }
  }
  Eigen::Map<const Eigen::VectorXd> wv(ll.weight.data(), m);
  ll.a = ll.z.transpose() * wv.asDiagonal() * ll.z;
  return ll;
}

Eigen::MatrixXd penalized(const LocalLinear& ll, double lambda, bool standardize) {
  Eigen::MatrixXd a = ll.a;
  for (Eigen::Index j = 1; j < a.rows(); ++j) {
    const double diag = ll.a(j, j);
    a(j, j) += (standardize && diag > 0.0) ? lambda * diag : lambda;
  }
  return a;
}

Eigen::FullPivLU<Eigen::MatrixXd> factor(const Eigen::MatrixXd& a) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw SingularDesignError("forest-weighted local linear design is singular");
  return lu;
}

// zeta_i for each support row.
std::vector<double> influence(const LocalLinear& ll, double lambda, bool standardize) {
  const Eigen::MatrixXd a = penalized(ll, lambda, standardize);
  const auto lu = factor(a);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(a.rows());
  e1(0) = 1.0;
  const Eigen::VectorXd row = lu.transpose().solve(e1);
  const Eigen::VectorXd zeta = ll.z * row;
  return {zeta.data(), zeta.data() + zeta.size()};
}

double resolve_lambda(const FittedForest& forest, std::span<const double> x) {
  if (forest.config().ridge_lambda) return *forest.config().ridge_lambda;
  return select_ridge_lambda(forest, x);
}

}  // namespace

std::vector<double> forest_weights(const FittedForest& forest, std::span<const double> x) {
  return weights_from(collect_leaves(forest, x), forest.data().size());
}

double rf_predict(const FittedForest& forest, std::span<const double> x) {
  const auto w = forest_weights(forest, x);
  const auto y = forest.data().outcomes();
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * y[i];
  return acc;
}

double rf_predict_tree_average(const FittedForest& forest, std::span<const double> x) {
  const auto hits = collect_leaves(forest, x);
  const auto y = forest.data().outcomes();
  double acc = 0.0;
  for (const auto& leaf : hits.leaves) {
    double s = 0.0;
    for (auto i : leaf) s += y[i];
    acc += s / static_cast<double>(leaf.size());
  }
  return acc / static_cast<double>(hits.leaves.size());
}

double llf_predict(const FittedForest& forest, std::span<const double> x, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  const auto w = forest_weights(forest, x);
  const LocalLinear ll = build_local(forest, x, w);
  const auto zeta = influence(ll, lambda, forest.config().standardize_penalty);
  const auto y = forest.data().outcomes();
  double acc = 0.0;
  for (std::size_t k = 0; k < ll.support.size(); ++k) acc += ll.weight[k] * zeta[k] * y[ll.support[k]];
  return acc;
}

double llf_predict(const FittedForest& forest, std::span<const double> x) {
  return llf_predict(forest, x, resolve_lambda(forest, x));
}

double select_ridge_lambda(const FittedForest& forest, std::span<const double> x) {
  static constexpr double kGrid[] = {0.01, 0.1, 1.0, 10.0};
  const auto w = forest_weights(forest, x);
  const LocalLinear ll = build_local(forest, x, w);
  const auto y = forest.data().outcomes();
  const auto m = static_cast<Eigen::Index>(ll.support.size());
  Eigen::VectorXd yv(m);
  for (Eigen::Index k = 0; k < m; ++k) yv(k) = y[ll.support[static_cast<std::size_t>(k)]];
  Eigen::Map<const Eigen::VectorXd> wv(ll.weight.data(), m);
  const Eigen::VectorXd zwy = ll.z.transpose() * (wv.array() * yv.array()).matrix();

  double best_lambda = kGrid[0];
  double best_err = std::numeric_limits<double>::infinity();
  for (double lambda : kGrid) {
    const Eigen::MatrixXd a = penalized(ll, lambda, forest.config().standardize_penalty);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd beta = lu.solve(zwy);
    const Eigen::MatrixXd ainv_zt = lu.solve(ll.z.transpose());
    double err = 0.0;
    bool ok = true;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double h = ll.weight[static_cast<std::size_t>(k)] * ll.z.row(k).dot(ainv_zt.col(k));
      if (!(h < 1.0 - 1e-12)) {
        ok = false;
        break;
      }
      const double resid = (yv(k) - ll.z.row(k).dot(beta)) / (1.0 - h);
      err += ll.weight[static_cast<std::size_t>(k)] * resid * resid;
    }
    if (ok && err < best_err) {
      best_err = err;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

PointPrediction predict_with_trees(const FittedForest& forest, std::span<const double> x,
                                   Predictor predictor) {
  const auto hits = collect_leaves(forest, x);
  const auto y = forest.data().outcomes();
  PointPrediction out;
  out.tree_index = hits.tree_index;
  out.tree_values.reserve(hits.leaves.size());
  if (predictor == Predictor::kRf) {
    for (const auto& leaf : hits.leaves) {
      double s = 0.0;
      for (auto i : leaf) s += y[i];
      out.tree_values.push_back(s / static_cast<double>(leaf.size()));
    }
  } else {
    const auto w = weights_from(hits, forest.data().size());
    const LocalLinear ll = build_local(forest, x, w);
    const double lambda = resolve_lambda(forest, x);
    const auto zeta = influence(ll, lambda, forest.config().standardize_penalty);
    const auto m = static_cast<Eigen::Index>(ll.support.size());
    Eigen::VectorXd ys(m);
    for (Eigen::Index k = 0; k < m; ++k) ys(k) = y[ll.support[static_cast<std::size_t>(k)]];
    Eigen::Map<const Eigen::VectorXd> wv(ll.weight.data(), m);
    const Eigen::MatrixXd a = penalized(ll, lambda, forest.config().standardize_penalty);
    const Eigen::VectorXd beta = factor(a).solve(ll.z.transpose() * (wv.asDiagonal() * ys));
    const Eigen::VectorXd resid = ys - ll.z * beta;
    // Tree values carry the linearized error zeta_i * r_i; only their spread is used.
    std::vector<double> contrib(forest.data().size(), 0.0);
    double estimate = 0.0;
    for (std::size_t k = 0; k < ll.support.size(); ++k) {
      const auto row = ll.support[k];
      contrib[row] = zeta[k] * resid(static_cast<Eigen::Index>(k));
      estimate += ll.weight[k] * zeta[k] * y[row];
    }
    for (const auto& leaf : hits.leaves) {
      double s = 0.0;
      for (auto i : leaf) s += contrib[i];
      out.tree_values.push_back(s / static_cast<double>(leaf.size()));
    }
    out.estimate = estimate;
    return out;
  }
  out.estimate = std::accumulate(out.tree_values.begin(), out.tree_values.end(), 0.0) /
                 static_cast<double>(out.tree_values.size());
  return out;
}

double little_bags_variance_from_trees(std::span<const double> tree_values,
                                       std::span<const std::size_t> tree_index,
                                       std::size_t group_size, double floor) {
  if (group_size < 2) throw ConfigError("little bags need group_size >= 2");
  if (tree_values.size() != tree_index.size()) throw DimensionError("tree values and indices differ in length");
  std::vector<double> group_means;
  double within_sum = 0.0;
  std::size_t k = 0;
  while (k < tree_values.size()) {
    const std::size_t group = tree_index[k] / group_size;
    std::size_t end = k;
    while (end < tree_values.size() && tree_index[end] / group_size == group) ++end;
    if (end - k == group_size) {
      double mean = 0.0;
      for (std::size_t t = k; t < end; ++t) mean += tree_values[t];
      mean /= static_cast<double>(group_size);
      double ss = 0.0;
      for (std::size_t t = k; t < end; ++t) ss += (tree_values[t] - mean) * (tree_values[t] - mean);
      within_sum += ss / static_cast<double>(group_size - 1);
      group_means.push_back(mean);
    }
    k = end;
  }
  const std::size_t g = group_means.size();
  if (g < 2) throw ConfigError("little bags need at least two complete groups");
  const double grand = std::accumulate(group_means.begin(), group_means.end(), 0.0) / static_cast<double>(g);
  double between = 0.0;
  for (double m : group_means) between += (m - grand) * (m - grand);
  between /= static_cast<double>(g - 1);
  const double within = within_sum / static_cast<double>(g);
  return std::max(floor, between - within / static_cast<double>(group_size));
}

ForestEstimate predict_with_variance(const FittedForest& forest, std::span<const double> x,
                                     Predictor predictor) {
  if (forest.num_groups() < 2) throw ConfigError("little bags need at least two groups");
  const auto pred = predict_with_trees(forest, x, predictor);
  const auto y = forest.data().outcomes();
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  double scale = std::sqrt(ss / static_cast<double>(y.size()));
  if (!(scale > 0.0)) scale = std::max(1.0, std::abs(mean));
  const double var = little_bags_variance_from_trees(pred.tree_values, pred.tree_index,
                                                     forest.config().ci_group_size, 1e-12 * scale * scale);
  return {pred.estimate, var};
}

double little_bags_variance(const FittedForest& forest, std::span<const double> x,
                            Predictor predictor) {
  return predict_with_variance(forest, x, predictor).variance;
}

}  // namespace rdforest
