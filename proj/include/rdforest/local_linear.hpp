#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "rdforest/domain.hpp"

namespace rdforest {

enum class KernelShape { kTriangular, kEpanechnikov, kUniform };

KernelShape parse_kernel_shape(std::string_view name);
std::string_view kernel_shape_name(KernelShape shape);

/// Kernel and bandwidth. An empty bandwidth selects the rule of thumb.
struct KernelSpec {
  KernelShape shape = KernelShape::kTriangular;
  std::optional<double> bandwidth;

  void validate() const;
};

/// K(t / h) without the 1/h factor (which cancels in weighted least squares).
double kernel_weight(KernelShape shape, double t, double h);

struct LinearFit {
  double intercept = 0.0;  // fitted value at the centering point
  double slope = 0.0;
  double intercept_se = 0.0;  // HC0 sandwich standard error of the intercept
  std::size_t effective_n = 0;  // points with positive weight
};

/// Weighted least squares of y on (1, x - center). Throws SingularDesignError
/// when fewer than two distinct x carry positive weight.
LinearFit wls_linear_fit(std::span<const double> xs, std::span<const double> ys,
                         std::span<const double> weights, double center);

/// 1.06 * sd(x) * n^(-1/5), widened until each side of the cutoff has at
/// least 10 points strictly inside the bandwidth.
double rot_bandwidth(std::span<const double> xs, double cutoff);

/// Sharp RD by side-wise kernel-weighted local linear regression at `cutoff`
/// (treated iff x >= cutoff). The interval uses the HC0 sandwich without bias
/// correction, so it is only nominal when the bandwidth undersmooths.
EstimateReport llr_rd_estimate(const Dataset& data, double cutoff, const KernelSpec& kernel,
                               double level);

}  // namespace rdforest
