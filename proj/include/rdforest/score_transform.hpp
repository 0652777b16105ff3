#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "rdforest/domain.hpp"

namespace rdforest {

/// Collapse of a multivariate score to a signed distance from `center`.
struct CollapseSpec {
  ScorePoint center;
  double scale = 1.0;
  AssignmentRule rule;

  void validate() const;
};

/// s_i = sign_i * scale * |x_i - center|_2, sign_i = +1 on the treated side.
/// The result is univariate with effective cutoff 0; outcomes and labels are
/// carried over unchanged and no rule is attached.
Dataset collapse(const Dataset& data, const CollapseSpec& spec);

/// Signed distances only (same values as collapse(), without the copy).
std::vector<double> collapse_scores(const Dataset& data, const CollapseSpec& spec);

/// Density of E = |X - (0,0)| for X uniform on [-1,1]^2.
double analytic_density_uniform(double e);

/// Density of E = |X| for X ~ N(0, sigma^2 I_2) (Rayleigh).
double analytic_density_gaussian(double e, double sigma);

using JointDensity = std::function<double(double, double)>;
using SupportBounds = std::function<std::pair<double, double>(double)>;

/// Marginal density of E = |X - center| at e > 0 from the joint density of
/// (X1, X2):
///   f_E(e) = int_{l(e)}^{u(e)} e / sqrt(e^2 - v^2)
///            * [f(v + c1, c2 + sqrt(e^2 - v^2)) + f(v + c1, c2 - sqrt(e^2 - v^2))] dv.
/// The substitution v = e sin(theta) removes the endpoint singularity before a
/// Gauss-Legendre rule with `nodes` points is applied.
double prop1_marginal_by_quadrature(const JointDensity& joint_density, const ScorePoint& center,
                                    double e, const SupportBounds& bounds, std::size_t nodes);

struct SideDensity {
  double density_near_zero = 0.0;
  double reference_density = 0.0;
  double ratio = 0.0;
};

/// Histogram check for a density that vanishes at the collapsed cutoff.
/// Near band: (0, w] and [-w, 0); reference band: (w, 5w] and [-5w, -w),
/// with w the window rounded to a whole number of bins.
struct DensityDiagnostic {
  SideDensity positive;
  SideDensity negative;
  bool flagged = false;
  std::size_t bins = 0;
  double window = 0.0;
  double bin_width = 0.0;
  double threshold = 0.0;
};

inline constexpr std::size_t kDefaultDiagnosticBins = 10000;
inline constexpr double kDefaultDiagnosticThreshold = 0.25;

/// OpenMP kernel; histogram counts are merged in a fixed order.
DensityDiagnostic zero_density_diagnostic(std::span<const double> scores, std::size_t bins,
                                          double window, double threshold);

/// Defaults: 10,000 bins, window = range / 200, threshold 0.25.
DensityDiagnostic zero_density_diagnostic(std::span<const double> scores);

/// Serial reference for zero_density_diagnostic.
DensityDiagnostic zero_density_diagnostic_serial(std::span<const double> scores, std::size_t bins,
                                                 double window, double threshold);

/// Fraction of scores with lo <= |s| <= hi.
double empirical_abs_mass(std::span<const double> scores, double lo, double hi);

}  // namespace rdforest
