#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rdforest/domain.hpp"

namespace rdforest {

enum class Side { kTreated, kControl };

enum class CefBasis {
  kRawPowers1d,            // 1, x~, x~^2, ..., x~^degree
  kInteracted3rdOrder2d,   // 1, x1, x~1^2, x~1^3, x2, x~2^2, x~2^3, x~1*x~2
};

/// Side-specific polynomial conditional mean. `centers` are the demeaning
/// constants used for the x~ terms (raw x1/x2 linear terms of the 2-d basis
/// are not centered).
struct PolynomialCEF {
  int degree = 0;
  CefBasis basis = CefBasis::kRawPowers1d;
  std::vector<double> coeffs_treated;
  std::vector<double> coeffs_control;
  std::vector<double> centers;

  std::size_t dim() const noexcept { return basis == CefBasis::kRawPowers1d ? 1 : 2; }
  static std::size_t basis_size(CefBasis basis, int degree);
  void validate() const;
};

enum class ScoreLaw { kBetaTransform, kUniformSquare, kGaussianIid };
enum class OutcomeKind { kGaussianNoise, kBernoulliLogit };

struct ScoreLawSpec {
  ScoreLaw kind = ScoreLaw::kBetaTransform;
  double sigma = 1.0;  // gaussian_iid only
};

struct OutcomeSpec {
  OutcomeKind kind = OutcomeKind::kGaussianNoise;
  double sigma = 1.0;  // gaussian_noise only; 0 means noiseless
};

struct DGPSpec {
  std::string name;
  ScoreLawSpec score_law;
  PolynomialCEF cef;
  OutcomeSpec outcome;
  AssignmentRule rule = AssignmentRule::threshold(0.0);

  std::size_t dim() const noexcept { return cef.dim(); }
  void validate() const;
};

/// Rows per independently seeded chunk when sampling. Fixed so that output
/// never depends on the number of worker threads.
inline constexpr std::size_t kSampleChunk = 4096;

std::vector<ScorePoint> sample_scores(const DGPSpec& spec, std::size_t n, std::uint64_t seed);

/// Row-major flat variant of sample_scores (identical draws).
std::vector<double> sample_scores_flat(const DGPSpec& spec, std::size_t n, std::uint64_t seed);

double eval_cef(const PolynomialCEF& cef, std::span<const double> x, Side side);
inline double eval_cef(const PolynomialCEF& cef, const ScorePoint& x, Side side) {
  return eval_cef(cef, x.coords(), side);
}

/// Conditional mean of the outcome on one side (applies the logistic link for
/// binary outcomes).
double conditional_mean(const DGPSpec& spec, std::span<const double> x, Side side);

/// mu+(x_c) - mu-(x_c). Throws BoundaryError when x_c fails the boundary probe.
double true_effect(const DGPSpec& spec, const ScorePoint& x_c);

/// OpenMP kernel: chunks are simulated in parallel.
Dataset simulate(const DGPSpec& spec, std::size_t n, std::uint64_t seed);

/// Serial reference for `simulate`; produces bit-identical output.
Dataset simulate_serial(const DGPSpec& spec, std::size_t n, std::uint64_t seed);

double logistic(double t) noexcept;

/// Built-in presets: "lee", "square2d", "kt_price", "kt_age", "kt_turnout".
DGPSpec dgp_preset(std::string_view name);
std::vector<std::string> dgp_preset_names();

}  // namespace rdforest
