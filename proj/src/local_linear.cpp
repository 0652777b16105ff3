#include "rdforest/local_linear.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rdforest/error.hpp"

namespace rdforest {

KernelShape parse_kernel_shape(std::string_view name) {
  if (name == "triangular") return KernelShape::kTriangular;
  if (name == "epanechnikov") return KernelShape::kEpanechnikov;
  if (name == "uniform") return KernelShape::kUniform;
  throw ConfigError("unknown kernel '" + std::string(name) + "'");
}

std::string_view kernel_shape_name(KernelShape shape) {
  switch (shape) {
    case KernelShape::kTriangular: return "triangular";
    case KernelShape::kEpanechnikov: return "epanechnikov";
    case KernelShape::kUniform: return "uniform";
  }
  return "triangular";
}

void KernelSpec::validate() const {
  if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth))) {
    throw ConfigError("bandwidth must be positive");
  }
}

double kernel_weight(KernelShape shape, double t, double h) {
  const double u = t / h;
  switch (shape) {
    case KernelShape::kTriangular: return std::max(0.0, 1.0 - std::abs(u));
    case KernelShape::kEpanechnikov: return 0.75 * std::max(0.0, 1.0 - u * u);
    case KernelShape::kUniform: return std::abs(u) <= 1.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

LinearFit wls_linear_fit(std::span<const double> xs, std::span<const double> ys,
                         std::span<const double> weights, double center) {
  if (xs.size() != ys.size() || xs.size() != weights.size()) {
    throw DimensionError("wls_linear_fit: input lengths differ");
  }
  double sw = 0.0, swt = 0.0, swy = 0.0;
  std::size_t positive = 0;
  bool distinct = false;
  double first_x = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double w = weights[i];
    if (w < 0.0 || !std::isfinite(w)) throw DomainError("wls_linear_fit: weights must be non-negative");
    if (w == 0.0) continue;
    if (positive == 0) first_x = xs[i];
    else if (xs[i] != first_x) distinct = true;
    ++positive;
    sw += w;
    swt += w * (xs[i] - center);
    swy += w * ys[i];
  }
  if (!distinct) throw SingularDesignError("weighted design has fewer than two distinct x values");
  const double tbar = swt / sw;
  const double ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const double dt = xs[i] - center - tbar;
    sxx += w * dt * dt;
    sxy += w * dt * (ys[i] - ybar);
  }
  if (!(sxx > 0.0)) throw SingularDesignError("weighted design is numerically singular");

  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * tbar;
  fit.effective_n = positive;

  // HC0 sandwich for the intercept: A = Z'WZ, B = sum w^2 e^2 z z'.
  double a00 = 0.0, a01 = 0.0, a11 = 0.0, b00 = 0.0, b01 = 0.0, b11 = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const double t = xs[i] - center;
    const double e = ys[i] - fit.intercept - fit.slope * t;
    a00 += w;
    a01 += w * t;
    a11 += w * t * t;
    const double we2 = w * w * e * e;
    b00 += we2;
    b01 += we2 * t;
    b11 += we2 * t * t;
  }
  const double det = a00 * a11 - a01 * a01;
  // First row of A^{-1}.
  const double r0 = a11 / det, r1 = -a01 / det;
  const double var = r0 * r0 * b00 + 2.0 * r0 * r1 * b01 + r1 * r1 * b11;
  fit.intercept_se = std::sqrt(std::max(0.0, var));
  return fit;
}

double rot_bandwidth(std::span<const double> xs, double cutoff) {
  constexpr std::size_t kMinPerSide = 10;
  const std::size_t n = xs.size();
  if (n < 20) throw ConfigError("rule-of-thumb bandwidth needs at least 20 observations");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw ConfigError("rule-of-thumb bandwidth: scores have zero spread");
  double h = 1.06 * sd * std::pow(static_cast<double>(n), -0.2);

  std::vector<double> above, below;
  for (double x : xs) (x >= cutoff ? above : below).push_back(std::abs(x - cutoff));
  for (auto* side : {&above, &below}) {
    if (side->size() < kMinPerSide) {
      throw ConfigError("rule-of-thumb bandwidth: fewer than 10 observations on one side");
    }
    std::nth_element(side->begin(), side->begin() + (kMinPerSide - 1), side->end());
    const double d10 = (*side)[kMinPerSide - 1];
    // Weights vanish at |t| = h, so the 10th point must lie strictly inside.
    if (!(d10 < h)) h = std::max(d10 * (1.0 + 1e-9), d10 + 1e-300);
  }
  return h;
}

EstimateReport llr_rd_estimate(const Dataset& data, double cutoff, const KernelSpec& kernel,
                               double level) {
  if (data.dim() != 1) throw MethodError("local linear RD is univariate; collapse the scores first");
  kernel.validate();
  const auto x = data.scores();
  const double h = kernel.bandwidth ? *kernel.bandwidth : rot_bandwidth(x, cutoff);

  std::vector<double> xs[2], ys[2], ws[2];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int side = x[i] >= cutoff ? 1 : 0;
    xs[side].push_back(x[i]);
    ys[side].push_back(data.y(i));
    ws[side].push_back(kernel_weight(kernel.shape, x[i] - cutoff, h));
  }
  if (xs[1].empty()) throw EmptySideError("no treated observations");
  if (xs[0].empty()) throw EmptySideError("no control observations");
  const LinearFit treated = wls_linear_fit(xs[1], ys[1], ws[1], cutoff);
  const LinearFit control = wls_linear_fit(xs[0], ys[0], ws[0], cutoff);
  const double se = std::sqrt(treated.intercept_se * treated.intercept_se +
                              control.intercept_se * control.intercept_se);
  return EstimateReport::make(treated.intercept - control.intercept, se, level, xs[1].size(),
                              xs[0].size());
}

}  // namespace rdforest
