#include <cmath>
#include <numbers>

#include "doctest.h"

#include "rdforest/dgp.hpp"
#include "rdforest/error.hpp"
#include "rdforest/quadrature.hpp"
#include "rdforest/random.hpp"
#include "rdforest/score_transform.hpp"

using namespace rdforest;

namespace {

const AssignmentRule kLine(CurveBoundary{{{-1.0, 0.0}, {1.0, 0.0}}, TreatedSide::kBelow});

double uniform_joint(double x1, double x2) {
  return (std::abs(x1) <= 1.0 && std::abs(x2) <= 1.0) ? 0.25 : 0.0;
}

double gaussian_joint(double x1, double x2) {
  return std::exp(-(x1 * x1 + x2 * x2) / 2.0) / (2.0 * std::numbers::pi);
}

std::pair<double, double> uniform_bounds(double e) {
  const double u = std::min(e, 1.0);
  return {-u, u};
}

std::pair<double, double> full_bounds(double e) { return {-e, e}; }

}  // namespace

TEST_CASE("collapse signs and magnitudes") {
  Dataset data({{0.0, ScorePoint{3.0, -4.0}, 1}, {0.0, ScorePoint{3.0, 4.0}, 0}, {0.0, ScorePoint{0.0, 0.0}, 1}}, kLine);
  const auto s = collapse_scores(data, {ScorePoint{0.0, 0.0}, 1.0, kLine});
  CHECK(s[0] == 5.0);
  CHECK(s[1] == -5.0);
  CHECK(s[2] == 0.0);
  const Dataset c = collapse(data, {ScorePoint{0.0, 0.0}, 2.0, kLine});
  CHECK(c.dim() == 1);
  CHECK(c.x(0, 0) == 10.0);
  CHECK_FALSE(c.rule().has_value());
  CHECK_THROWS_AS(collapse(data, {ScorePoint{0.0, 0.0}, 0.0, kLine}), ConfigError);
}

TEST_CASE("analytic densities") {
  CHECK(analytic_density_uniform(0.0) == 0.0);
  CHECK(analytic_density_uniform(0.5) == doctest::Approx(std::numbers::pi / 4.0).epsilon(1e-12));
  CHECK(std::abs(analytic_density_uniform(std::numbers::sqrt2)) < 1e-7);
  CHECK_THROWS_AS(analytic_density_uniform(1.5), DomainError);
  CHECK(analytic_density_gaussian(0.0, 1.0) == 0.0);
  CHECK(analytic_density_gaussian(1.0, 1.0) == doctest::Approx(0.606531).epsilon(1e-6));

  // Normalization by quadrature.
  const auto rule = gauss_legendre(200);
  const double mass_u = integrate(analytic_density_uniform, 0.0, 1.0, rule) +
                        integrate(analytic_density_uniform, 1.0, std::numbers::sqrt2, rule);
  CHECK(std::abs(mass_u - 1.0) < 1e-8);
  const double mass_g =
      integrate([](double e) { return analytic_density_gaussian(e, 1.0); }, 0.0, 40.0, gauss_legendre(400));
  CHECK(std::abs(mass_g - 1.0) < 1e-8);
}

TEST_CASE("gauss legendre integrates polynomials exactly") {
  const auto rule = gauss_legendre(8);
  double wsum = 0.0;
  for (double w : rule.weights) wsum += w;
  CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
  // Degree 15 is exact with 8 nodes.
  const double v = integrate([](double x) { return std::pow(x, 14) + x * x * x; }, -1.0, 1.0, rule);
  CHECK(v == doctest::Approx(2.0 / 15.0).epsilon(1e-13));
}

TEST_CASE("distance marginal quadrature against closed forms") {
  const ScorePoint c{0.0, 0.0};
  for (double e : {0.1, 0.25, 0.5, 0.9}) {
    CHECK(std::abs(prop1_marginal_by_quadrature(uniform_joint, c, e, uniform_bounds, 512) -
                   analytic_density_uniform(e)) < 1e-6);
    CHECK(std::abs(prop1_marginal_by_quadrature(gaussian_joint, c, e, full_bounds, 512) -
                   analytic_density_gaussian(e, 1.0)) < 1e-6);
  }
  CHECK(std::abs(prop1_marginal_by_quadrature(gaussian_joint, c, 1.0, full_bounds, 512) - 0.606531) < 1e-6);

  double prev = 1.0;
  for (double e : {0.2, 0.1, 0.05, 0.01, 0.001}) {
    const double u = prop1_marginal_by_quadrature(uniform_joint, c, e, uniform_bounds, 64);
    CHECK(u < prev);
    prev = u;
  }
  CHECK(prev < 2e-3);

  CHECK_THROWS_AS(prop1_marginal_by_quadrature(uniform_joint, c, 0.0, uniform_bounds, 64), DomainError);
  CHECK_THROWS_AS(prop1_marginal_by_quadrature(uniform_joint, c, 0.5, uniform_bounds, 8), ConfigError);
}

TEST_CASE("density diagnostic on flat and collapsed scores") {
  Rng rng(1);
  std::vector<double> flat(1000000);
  for (auto& v : flat) v = rng.uniform(-1.0, 1.0);
  const auto d = zero_density_diagnostic(flat);
  CHECK_FALSE(d.flagged);
  CHECK(d.positive.density_near_zero == doctest::Approx(0.5).epsilon(0.05));
  CHECK(d.negative.density_near_zero == doctest::Approx(0.5).epsilon(0.05));

  const auto sq = dgp_preset("square2d");
  const Dataset data = simulate(sq, 1000000, 2);
  const auto s = collapse_scores(data, {ScorePoint{0.0, 0.0}, 1.0, sq.rule});
  const auto dc = zero_density_diagnostic(s);
  CHECK(dc.flagged);
  const double oracle = std::numbers::pi * 0.05 * 0.05 / 4.0;
  CHECK(std::abs(empirical_abs_mass(s, 0.0, 0.05) - oracle) < 0.05 * oracle);

  auto gauss = sq;
  gauss.score_law = {ScoreLaw::kGaussianIid, 1.0};
  const Dataset gdata = simulate(gauss, 1000000, 2);
  CHECK(zero_density_diagnostic(collapse_scores(gdata, {ScorePoint{0.0, 0.0}, 1.0, sq.rule})).flagged);
}

TEST_CASE("diagnostic kernel matches its serial reference") {
  Rng rng(4);
  std::vector<double> v(300000);
  for (auto& x : v) x = rng.normal();
  const auto a = zero_density_diagnostic(v, 5000, 0.05, 0.25);
  const auto b = zero_density_diagnostic_serial(v, 5000, 0.05, 0.25);
  CHECK(a.positive.ratio == b.positive.ratio);
  CHECK(a.negative.density_near_zero == b.negative.density_near_zero);
  CHECK(a.flagged == b.flagged);
}
