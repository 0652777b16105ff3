#include "rdforest/score_transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rdforest/error.hpp"
#include "rdforest/quadrature.hpp"

namespace rdforest {

void CollapseSpec::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("collapse scale must be positive");
  if (center.dim() < 2) throw DimensionError("collapse center must have dimension >= 2");
  if (rule.dim() != center.dim()) throw DimensionError("collapse rule and center dimensions differ");
}

std::vector<double> collapse_scores(const Dataset& data, const CollapseSpec& spec) {
  spec.validate();
  if (data.dim() != spec.center.dim()) throw DimensionError("collapse: dimension mismatch");
  std::vector<double> s(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.point(i);
    double dist2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = x[j] - spec.center[j];
      dist2 += diff * diff;
    }
    const double dist = spec.scale * std::sqrt(dist2);
    s[i] = assign(spec.rule, x) == 1 ? dist : -dist;
  }
  return s;
}

Dataset collapse(const Dataset& data, const CollapseSpec& spec) {
  auto s = collapse_scores(data, spec);
  std::vector<double> y(data.outcomes().begin(), data.outcomes().end());
  std::vector<std::uint8_t> d(data.treatments().begin(), data.treatments().end());
  return Dataset(1, std::move(y), std::move(s), std::move(d));
}

double analytic_density_uniform(double e) {
  if (!(e >= 0.0 && e <= std::numbers::sqrt2)) {
    throw DomainError("analytic_density_uniform: e must lie in [0, sqrt(2)]");
  }
  if (e <= 1.0) return std::numbers::pi * e / 2.0;
  return e * (std::asin(1.0 / e) - std::asin(std::sqrt(e * e - 1.0) / e));
}

double analytic_density_gaussian(double e, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("analytic_density_gaussian: sigma must be positive");
  if (!(e >= 0.0)) throw DomainError("analytic_density_gaussian: e must be non-negative");
  const double s2 = sigma * sigma;
  return e / s2 * std::exp(-e * e / (2.0 * s2));
}

double prop1_marginal_by_quadrature(const JointDensity& joint_density, const ScorePoint& center,
                                    double e, const SupportBounds& bounds, std::size_t nodes) {
  if (center.dim() != 2) throw DimensionError("prop1 quadrature needs a bivariate center");
  if (!(e > 0.0)) throw DomainError("prop1 quadrature needs e > 0");
  if (nodes < 16) throw ConfigError("prop1 quadrature needs at least 16 nodes");
  const auto [lo, hi] = bounds(e);
  if (!(lo <= hi)) throw ConfigError("prop1 quadrature: l(e) must not exceed u(e)");
  const double c1 = center[0], c2 = center[1];
  const double theta_lo = std::asin(std::clamp(lo / e, -1.0, 1.0));
  const double theta_hi = std::asin(std::clamp(hi / e, -1.0, 1.0));
  const auto rule = gauss_legendre(nodes);
  const double value = integrate(
      [&](double theta) {
        const double v = e * std::sin(theta);
        const double w = e * std::cos(theta);
        return e * (joint_density(v + c1, c2 + w) + joint_density(v + c1, c2 - w));
      },
      theta_lo, theta_hi, rule);
  if (!std::isfinite(value)) throw NumericalError("prop1 quadrature produced a non-finite value");
  return value;
}

// ---------------------------------------------------------------------------
// Zero-density diagnostic

namespace {

// counts[0..3]: positive near, positive reference, negative near, negative reference.
struct BandCounts {
  std::size_t c[4] = {0, 0, 0, 0};
};

void count_range(std::span<const double> scores, double bin_width, std::size_t window_bins,
                 BandCounts& out) {
  for (double s : scores) {
    if (s == 0.0) continue;
    const double k = std::ceil(std::abs(s) / bin_width);
    const double wb = static_cast<double>(window_bins);
    const int base = s > 0.0 ? 0 : 2;
    if (k <= wb) ++out.c[base];
    else if (k <= 5.0 * wb) ++out.c[base + 1];
  }
}

struct DiagnosticSetup {
  double bin_width;
  std::size_t window_bins;
};

DiagnosticSetup setup(std::span<const double> scores, std::size_t bins, double window,
                      double threshold) {
  if (scores.empty()) throw EmptySideError("diagnostic: no scores");
  if (bins == 0) throw ConfigError("diagnostic: bins must be positive");
  if (!(window > 0.0)) throw ConfigError("diagnostic: window must be positive");
  if (!std::isfinite(threshold)) throw ConfigError("diagnostic: threshold must be finite");
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  if (!(*mn < 0.0)) throw EmptySideError("diagnostic: no scores below the cutoff");
  if (!(*mx > 0.0)) throw EmptySideError("diagnostic: no scores above the cutoff");
  const double range = *mx - *mn;
  if (!(window < 0.5 * range)) throw ConfigError("diagnostic: window must be below half the score range");
  const double bin_width = range / static_cast<double>(bins);
  const auto window_bins =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window / bin_width)));
  return {bin_width, window_bins};
}

DensityDiagnostic finish(const BandCounts& counts, std::size_t n, std::size_t bins,
                         const DiagnosticSetup& cfg, double threshold) {
  DensityDiagnostic out;
  out.bins = bins;
  out.bin_width = cfg.bin_width;
  out.window = cfg.bin_width * static_cast<double>(cfg.window_bins);
  out.threshold = threshold;
  const double total = static_cast<double>(n);
  auto side = [&](std::size_t near, std::size_t ref) {
    SideDensity sd;
    sd.density_near_zero = static_cast<double>(near) / (total * out.window);
    sd.reference_density = static_cast<double>(ref) / (total * 4.0 * out.window);
    if (sd.reference_density > 0.0) {
      sd.ratio = sd.density_near_zero / sd.reference_density;
    } else {
      sd.ratio = sd.density_near_zero > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return sd;
  };
  out.positive = side(counts.c[0], counts.c[1]);
  out.negative = side(counts.c[2], counts.c[3]);
  out.flagged = std::min(out.positive.ratio, out.negative.ratio) < threshold;
  return out;
}

}  // namespace

DensityDiagnostic zero_density_diagnostic(std::span<const double> scores, std::size_t bins,
                                          double window, double threshold) {
  const auto cfg = setup(scores, bins, window, threshold);
  constexpr std::size_t kChunk = 1 << 16;
  const std::size_t chunks = (scores.size() + kChunk - 1) / kChunk;
  std::vector<BandCounts> partial(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t len = std::min(kChunk, scores.size() - begin);
    count_range(scores.subspan(begin, len), cfg.bin_width, cfg.window_bins,
                partial[static_cast<std::size_t>(c)]);
  }
  BandCounts total;
  for (const auto& p : partial) {
    for (int k = 0; k < 4; ++k) total.c[k] += p.c[k];
  }
  return finish(total, scores.size(), bins, cfg, threshold);
}

DensityDiagnostic zero_density_diagnostic_serial(std::span<const double> scores, std::size_t bins,
                                                 double window, double threshold) {
  const auto cfg = setup(scores, bins, window, threshold);
  BandCounts total;
  count_range(scores, cfg.bin_width, cfg.window_bins, total);
  return finish(total, scores.size(), bins, cfg, threshold);
}

DensityDiagnostic zero_density_diagnostic(std::span<const double> scores) {
  if (scores.empty()) throw EmptySideError("diagnostic: no scores");
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  return zero_density_diagnostic(scores, kDefaultDiagnosticBins, (*mx - *mn) / 200.0,
                                 kDefaultDiagnosticThreshold);
}

double empirical_abs_mass(std::span<const double> scores, double lo, double hi) {
  if (scores.empty()) throw ConfigError("empirical_abs_mass: no scores");
  std::size_t count = 0;
  for (double s : scores) {
    const double a = std::abs(s);
    if (a >= lo && a <= hi) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(scores.size());
}

}  // namespace rdforest
