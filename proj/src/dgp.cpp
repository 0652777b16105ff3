#include "rdforest/dgp.hpp"

#include <algorithm>
#include <cmath>

#include "rdforest/error.hpp"
#include "rdforest/random.hpp"

namespace rdforest {

std::size_t PolynomialCEF::basis_size(CefBasis basis, int degree) {
  if (basis == CefBasis::kRawPowers1d) {
    if (degree < 0) throw ConfigError("polynomial degree must be non-negative");
    return static_cast<std::size_t>(degree) + 1;
  }
  if (degree != 3) throw ConfigError("the interacted 2-d basis is defined for degree 3 only");
  return 8;
}

void PolynomialCEF::validate() const {
  const std::size_t k = basis_size(basis, degree);
  if (coeffs_treated.size() != k || coeffs_control.size() != k) {
    throw ConfigError("coefficient lists must have " + std::to_string(k) + " entries");
  }
  if (!centers.empty() && centers.size() != dim()) {
    throw ConfigError("centers must have one entry per score dimension");
  }
  for (double c : coeffs_treated) if (!std::isfinite(c)) throw ConfigError("non-finite coefficient");
  for (double c : coeffs_control) if (!std::isfinite(c)) throw ConfigError("non-finite coefficient");
  for (double c : centers) if (!std::isfinite(c)) throw ConfigError("non-finite center");
}

void DGPSpec::validate() const {
  cef.validate();
  if (rule.dim() != cef.dim()) throw DimensionError("DGP rule and CEF dimensions differ");
  if (score_law.kind == ScoreLaw::kBetaTransform && cef.dim() != 1) {
    throw ConfigError("beta_transform scores are univariate");
  }
  if (score_law.kind == ScoreLaw::kGaussianIid && !(score_law.sigma > 0.0)) {
    throw ConfigError("gaussian_iid score law needs sigma > 0");
  }
  if (outcome.kind == OutcomeKind::kGaussianNoise && !(outcome.sigma >= 0.0)) {
    throw ConfigError("gaussian_noise needs sigma >= 0");
  }
}

double logistic(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double eval_cef(const PolynomialCEF& cef, std::span<const double> x, Side side) {
  if (x.size() != cef.dim()) throw DimensionError("eval_cef: dimension mismatch");
  const auto& c = side == Side::kTreated ? cef.coeffs_treated : cef.coeffs_control;
  const double c1 = cef.centers.empty() ? 0.0 : cef.centers[0];
  if (cef.basis == CefBasis::kRawPowers1d) {
    const double t = x[0] - c1;
    double acc = 0.0;
    for (std::size_t p = c.size(); p-- > 0;) acc = acc * t + c[p];
    return acc;
  }
  const double c2 = cef.centers.empty() ? 0.0 : cef.centers[1];
  const double x1 = x[0], x2 = x[1];
  const double t1 = x1 - c1, t2 = x2 - c2;
  return c[0] + c[1] * x1 + c[2] * t1 * t1 + c[3] * t1 * t1 * t1 + c[4] * x2 + c[5] * t2 * t2 +
         c[6] * t2 * t2 * t2 + c[7] * t1 * t2;
}

double conditional_mean(const DGPSpec& spec, std::span<const double> x, Side side) {
  const double v = eval_cef(spec.cef, x, side);
  return spec.outcome.kind == OutcomeKind::kBernoulliLogit ? logistic(v) : v;
}

double true_effect(const DGPSpec& spec, const ScorePoint& x_c) {
  if (x_c.dim() != spec.dim()) throw DimensionError("true_effect: dimension mismatch");
  if (!probe_boundary(spec.rule, x_c)) {
    throw BoundaryError("true_effect: point is not on the treatment boundary");
  }
  return conditional_mean(spec, x_c.coords(), Side::kTreated) -
         conditional_mean(spec, x_c.coords(), Side::kControl);
}

namespace {

void draw_score(const ScoreLawSpec& law, std::size_t dim, Rng& rng, double* out) {
  switch (law.kind) {
    case ScoreLaw::kBetaTransform:
      out[0] = 2.0 * rng.beta(2.0, 4.0) - 1.0;
      return;
    case ScoreLaw::kUniformSquare:
      for (std::size_t j = 0; j < dim; ++j) out[j] = rng.uniform(-1.0, 1.0);
      return;
    case ScoreLaw::kGaussianIid:
      for (std::size_t j = 0; j < dim; ++j) out[j] = law.sigma * rng.normal();
      return;
  }
  throw ConfigError("unknown score law");
}

std::size_t chunk_count(std::size_t n) { return (n + kSampleChunk - 1) / kSampleChunk; }

void scores_chunk(const DGPSpec& spec, std::size_t n, std::uint64_t seed, std::size_t chunk,
                  double* x) {
  const std::size_t dim = spec.dim();
  Rng rng(derive_seed(seed, {0, chunk}));
  const std::size_t end = std::min(n, (chunk + 1) * kSampleChunk);
  for (std::size_t i = chunk * kSampleChunk; i < end; ++i) draw_score(spec.score_law, dim, rng, x + i * dim);
}

void outcomes_chunk(const DGPSpec& spec, std::size_t n, std::uint64_t seed, std::size_t chunk,
                    const double* x, double* y, std::uint8_t* d) {
  const std::size_t dim = spec.dim();
  Rng rng(derive_seed(seed, {1, chunk}));
  const std::size_t end = std::min(n, (chunk + 1) * kSampleChunk);
  for (std::size_t i = chunk * kSampleChunk; i < end; ++i) {
    std::span<const double> point(x + i * dim, dim);
    const int side = assign(spec.rule, point);
    d[i] = static_cast<std::uint8_t>(side);
    const double mean = eval_cef(spec.cef, point, side ? Side::kTreated : Side::kControl);
    if (spec.outcome.kind == OutcomeKind::kGaussianNoise) {
      y[i] = spec.outcome.sigma > 0.0 ? mean + spec.outcome.sigma * rng.normal() : mean;
    } else {
      y[i] = rng.bernoulli(logistic(mean)) ? 1.0 : 0.0;
    }
  }
}

void simulate_chunk(const DGPSpec& spec, std::size_t n, std::uint64_t seed, std::size_t chunk,
                    double* x, double* y, std::uint8_t* d) {
  scores_chunk(spec, n, seed, chunk, x);
  outcomes_chunk(spec, n, seed, chunk, x, y, d);
}

}  // namespace

std::vector<double> sample_scores_flat(const DGPSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample size must be at least 1");
  spec.validate();
  std::vector<double> x(n * spec.dim());
  const auto chunks = static_cast<std::ptrdiff_t>(chunk_count(n));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) scores_chunk(spec, n, seed, static_cast<std::size_t>(c), x.data());
  return x;
}

std::vector<ScorePoint> sample_scores(const DGPSpec& spec, std::size_t n, std::uint64_t seed) {
  const auto flat = sample_scores_flat(spec, n, seed);
  const std::size_t dim = spec.dim();
  std::vector<ScorePoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.emplace_back(std::vector<double>(flat.begin() + i * dim, flat.begin() + (i + 1) * dim));
  }
  return out;
}

Dataset simulate(const DGPSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample size must be at least 1");
  spec.validate();
  std::vector<double> x(n * spec.dim()), y(n);
  std::vector<std::uint8_t> d(n);
  const auto chunks = static_cast<std::ptrdiff_t>(chunk_count(n));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    simulate_chunk(spec, n, seed, static_cast<std::size_t>(c), x.data(), y.data(), d.data());
  }
  return Dataset(spec.dim(), std::move(y), std::move(x), std::move(d), spec.rule);
}

Dataset simulate_serial(const DGPSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample size must be at least 1");
  spec.validate();
  std::vector<double> x(n * spec.dim()), y(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t c = 0; c < chunk_count(n); ++c) simulate_chunk(spec, n, seed, c, x.data(), y.data(), d.data());
  return Dataset(spec.dim(), std::move(y), std::move(x), std::move(d), spec.rule);
}

// ---------------------------------------------------------------------------
// Presets

namespace {

DGPSpec bivariate(std::string name, std::vector<double> treated, std::vector<double> control,
                  OutcomeSpec outcome) {
  DGPSpec spec;
  spec.name = std::move(name);
  spec.score_law = {ScoreLaw::kUniformSquare, 1.0};
  spec.cef = {3, CefBasis::kInteracted3rdOrder2d, std::move(treated), std::move(control), {0.0, 0.0}};
  spec.outcome = outcome;
  spec.rule = CurveBoundary{{{-1.0, 0.0}, {1.0, 0.0}}, TreatedSide::kBelow};
  return spec;
}

}  // namespace

std::vector<std::string> dgp_preset_names() {
  return {"lee", "square2d", "kt_price", "kt_age", "kt_turnout"};
}

DGPSpec dgp_preset(std::string_view name) {
  if (name == "lee") {
    DGPSpec spec;
    spec.name = "lee";
    spec.score_law = {ScoreLaw::kBetaTransform, 1.0};
    spec.cef = {5,
                CefBasis::kRawPowers1d,
                {0.52, 0.84, -3.00, 7.99, -9.01, 3.56},
                {0.48, 1.27, 7.18, 20.21, 21.54, 7.33},
                {0.0}};
    spec.outcome = {OutcomeKind::kGaussianNoise, 0.1295};
    spec.rule = AssignmentRule::threshold(0.0);
    return spec;
  }
  if (name == "square2d") {
    // Smooth synthetic surface; treated = control + 1 everywhere.
    std::vector<double> control = {0.2, 0.5, 0.3, -0.2, 0.4, 0.1, 0.05, 0.25};
    std::vector<double> treated = control;
    treated[0] += 1.0;
    return bivariate("square2d", treated, control, {OutcomeKind::kGaussianNoise, 0.3});
  }
  // Interacted third-order fits of the geographic design. The demeaning
  // centers of the original coordinates are unknown and default to (0, 0);
  // override them through a JSON spec.
  if (name == "kt_price") {
    return bivariate("kt_price",
                     {13544.3, 150.2, -11847.6, -29821.7, 259.3, -15479.8, -207469.6, 24446.9},
                     {230407.6, -9713.5, 537644.5, -8356369.6, -2164.6, -9998.4, 748352.9, 55631.1},
                     {OutcomeKind::kGaussianNoise, 32.6334});
  }
  if (name == "kt_age") {
    return bivariate("kt_age",
                     {-477.8, -70.0, -111.9, -54704.1, -44.9, 4564.6, 107699.6, -5863.3},
                     {77307.5, -1026.2, 60847.1, -749930.1, 481.1, -13224.5, 185693.5, -16725.5},
                     {OutcomeKind::kGaussianNoise, 15.9496});
  }
  if (name == "kt_turnout") {
    return bivariate("kt_turnout",
                     {-200.4, 3.7, 224.4, 1028.1, -0.7, 57.1, 3778.1, -127.5},
                     {10399.6, -286.5, 10516.0, -114884.8, -15.4, -423.8, 12700.1, 228.7},
                     {OutcomeKind::kBernoulliLogit, 0.0});
  }
  throw ConfigError("unknown DGP preset '" + std::string(name) + "'");
}

}  // namespace rdforest
