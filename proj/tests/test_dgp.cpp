#include <cmath>

#include "doctest.h"

#include "rdforest/dgp.hpp"
#include "rdforest/error.hpp"

using namespace rdforest;

namespace {

// Treated Lee polynomial written out term by term.
double lee_treated(double x) {
  return 0.52 + 0.84 * x - 3.00 * x * x + 7.99 * x * x * x - 9.01 * std::pow(x, 4) + 3.56 * std::pow(x, 5);
}

}  // namespace

TEST_CASE("lee cef values") {
  const auto lee = dgp_preset("lee");
  CHECK(eval_cef(lee.cef, ScorePoint{0.0}, Side::kControl) == doctest::Approx(0.48).epsilon(1e-15));
  CHECK(eval_cef(lee.cef, ScorePoint{0.0}, Side::kTreated) == doctest::Approx(0.52).epsilon(1e-15));
  CHECK(std::abs(eval_cef(lee.cef, ScorePoint{0.1}, Side::kTreated) - 0.5811246) < 1e-7);
  for (double x : {-0.9, -0.3, 0.2, 0.7}) {
    CHECK(eval_cef(lee.cef, ScorePoint{x}, Side::kTreated) == doctest::Approx(lee_treated(x)).epsilon(1e-13));
  }
}

TEST_CASE("true effects") {
  CHECK(std::abs(true_effect(dgp_preset("lee"), ScorePoint{0.0}) - 0.04) < 1e-12);
  CHECK_THROWS_AS(true_effect(dgp_preset("lee"), ScorePoint{0.5}), BoundaryError);

  auto flat = dgp_preset("kt_turnout");
  std::fill(flat.cef.coeffs_treated.begin(), flat.cef.coeffs_treated.end(), 0.0);
  std::fill(flat.cef.coeffs_control.begin(), flat.cef.coeffs_control.end(), 0.0);
  CHECK(true_effect(flat, ScorePoint{0.3, 0.0}) == 0.0);

  const auto sq = dgp_preset("square2d");
  for (double x1 : {-0.8, -0.1, 0.0, 0.45, 0.9}) {
    CHECK(true_effect(sq, ScorePoint{x1, 0.0}) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("beta_transform scores") {
  const auto lee = dgp_preset("lee");
  const auto x = sample_scores_flat(lee, 1000000, 21);
  double sum = 0.0;
  bool inside = true;
  for (double v : x) {
    sum += v;
    inside = inside && v >= -1.0 && v <= 1.0;
  }
  CHECK(inside);
  CHECK(std::abs(sum / 1e6 + 1.0 / 3.0) < 0.005);
}

TEST_CASE("uniform_square scores are centered") {
  const auto sq = dgp_preset("square2d");
  const auto x = sample_scores_flat(sq, 1000000, 5);
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < 1000000; ++i) {
    m1 += x[2 * i];
    m2 += x[2 * i + 1];
  }
  CHECK(std::abs(m1 / 1e6) < 0.005);
  CHECK(std::abs(m2 / 1e6) < 0.005);
}

TEST_CASE("lee residual spread") {
  const auto lee = dgp_preset("lee");
  const Dataset data = simulate(lee, 100000, 8);
  double sum = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = data.y(i) - eval_cef(lee.cef, data.point(i), data.treatment(i) ? Side::kTreated : Side::kControl);
    sum += r;
    ss += r * r;
  }
  const double n = static_cast<double>(data.size());
  const double sd = std::sqrt((ss - sum * sum / n) / (n - 1.0));
  CHECK(std::abs(sd - 0.1295) < 0.002);
}

TEST_CASE("noiseless and binary outcomes") {
  auto lee = dgp_preset("lee");
  lee.outcome.sigma = 0.0;
  const Dataset data = simulate(lee, 5000, 3);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(data.y(i) == eval_cef(lee.cef, data.point(i), data.treatment(i) ? Side::kTreated : Side::kControl));
  }
  const Dataset turnout = simulate(dgp_preset("kt_turnout"), 5000, 3);
  for (double y : turnout.outcomes()) CHECK((y == 0.0 || y == 1.0));
}

TEST_CASE("labels follow the rule") {
  const auto sq = dgp_preset("square2d");
  const Dataset data = simulate(sq, 3000, 4);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(data.treatment(i) == assign(sq.rule, data.point(i)));
}

TEST_CASE("simulate matches its serial reference") {
  for (const auto& name : dgp_preset_names()) {
    const auto spec = dgp_preset(name);
    const std::size_t n = 3 * kSampleChunk + 17;
    const Dataset a = simulate(spec, n, 99);
    const Dataset b = simulate_serial(spec, n, 99);
    CHECK(std::equal(a.outcomes().begin(), a.outcomes().end(), b.outcomes().begin()));
    CHECK(std::equal(a.scores().begin(), a.scores().end(), b.scores().begin()));
    const auto flat = sample_scores_flat(spec, n, 99);
    CHECK(std::equal(flat.begin(), flat.end(), a.scores().begin()));
  }
}

TEST_CASE("prefix stability across sample sizes") {
  const auto lee = dgp_preset("lee");
  const Dataset small = simulate(lee, 100, 12);
  const Dataset large = simulate(lee, 10000, 12);
  for (std::size_t i = 0; i < 100; ++i) CHECK(small.y(i) == large.y(i));
}

TEST_CASE("spec validation") {
  auto bad = dgp_preset("lee");
  bad.cef.coeffs_treated.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  auto neg = dgp_preset("lee");
  neg.outcome.sigma = -1.0;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
  CHECK_THROWS_AS(dgp_preset("nope"), ConfigError);
  CHECK_THROWS_AS(simulate(dgp_preset("lee"), 0, 1), ConfigError);
}
