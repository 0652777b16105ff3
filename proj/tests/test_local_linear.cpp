#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"

#include "rdforest/dgp.hpp"
#include "rdforest/error.hpp"
#include "rdforest/local_linear.hpp"
#include "rdforest/random.hpp"

using namespace rdforest;

TEST_CASE("kernel weights") {
  CHECK(kernel_weight(KernelShape::kTriangular, 0.0, 1.0) == 1.0);
  CHECK(kernel_weight(KernelShape::kTriangular, 0.7, 0.7) == 0.0);
  CHECK(kernel_weight(KernelShape::kEpanechnikov, 0.25, 0.5) == doctest::Approx(0.5625));
  CHECK(kernel_weight(KernelShape::kUniform, -0.5, 0.5) == 1.0);
  CHECK(kernel_weight(KernelShape::kUniform, 0.51, 0.5) == 0.0);
  CHECK(parse_kernel_shape("epanechnikov") == KernelShape::kEpanechnikov);
  CHECK_THROWS_AS(parse_kernel_shape("gauss"), ConfigError);
}

TEST_CASE("weighted fit through two points") {
  const double xs[] = {1.0, 2.0}, ys[] = {2.0, 3.0}, ws[] = {1.0, 1.0};
  const auto fit = wls_linear_fit(xs, ys, ws, 0.0);
  CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-14));

  const double cy[] = {4.0, 4.0};
  const auto flat = wls_linear_fit(xs, cy, ws, 0.0);
  CHECK(flat.intercept == doctest::Approx(4.0));
  CHECK(flat.slope == 0.0);

  const double one_x[] = {1.0, 1.0, 5.0}, y3[] = {1.0, 2.0, 3.0}, w3[] = {1.0, 2.0, 0.0};
  CHECK_THROWS_AS(wls_linear_fit(one_x, y3, w3, 0.0), SingularDesignError);
}

TEST_CASE("weighted fit agrees with the normal equations") {
  Rng rng(77);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 5 + static_cast<int>(rng.index(40));
    std::vector<double> x(n), y(n), w(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.uniform(-2.0, 2.0);
      y[i] = rng.normal();
      w[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    }
    w[0] = 1.0;
    w[1] = 1.0;
    const double c = rng.uniform(-1.0, 1.0);
    const auto fit = wls_linear_fit(x, y, w, c);

    Eigen::MatrixXd Z(n, 2);
    Eigen::VectorXd Y(n), W(n);
    for (int i = 0; i < n; ++i) {
      Z(i, 0) = 1.0;
      Z(i, 1) = x[i] - c;
      Y(i) = y[i];
      W(i) = w[i];
    }
    const Eigen::MatrixXd A = Z.transpose() * W.asDiagonal() * Z;
    const Eigen::Vector2d beta = A.ldlt().solve(Z.transpose() * W.asDiagonal() * Y);
    CHECK(fit.intercept == doctest::Approx(beta(0)).epsilon(1e-9));
    CHECK(fit.slope == doctest::Approx(beta(1)).epsilon(1e-9));

    const Eigen::VectorXd e = Y - Z * beta;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 2);
    for (int i = 0; i < n; ++i) B += w[i] * w[i] * e(i) * e(i) * Z.row(i).transpose() * Z.row(i);
    const Eigen::MatrixXd Ainv = A.inverse();
    const double se = std::sqrt((Ainv * B * Ainv)(0, 0));
    CHECK(fit.intercept_se == doctest::Approx(se).epsilon(1e-8));
  }
}

TEST_CASE("rule of thumb bandwidth") {
  Rng rng(5);
  std::vector<double> x(100000);
  for (auto& v : x) v = rng.normal();
  CHECK(rot_bandwidth(x, 0.0) == doctest::Approx(0.106).epsilon(0.02));

  std::vector<double> constant(50, 1.0);
  CHECK_THROWS_AS(rot_bandwidth(constant, 1.0), ConfigError);

  // Only 10 points above the cutoff, far out: the bandwidth must reach them.
  std::vector<double> sparse;
  for (int i = 0; i < 200; ++i) sparse.push_back(-1.0 + i * 0.005);
  for (int i = 0; i < 10; ++i) sparse.push_back(0.5 + i * 0.01);
  const double h = rot_bandwidth(sparse, 0.0);
  int above = 0;
  for (double v : sparse) above += (v >= 0.0 && v < h);
  CHECK(above >= 10);
}

TEST_CASE("llr recovers exact jumps") {
  Rng rng(2);
  std::vector<LabeledSample> jump, smooth;
  for (int i = 0; i < 400; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    jump.push_back({(x >= 0.0 ? 1.0 : 0.0) + x, ScorePoint{x}, x >= 0.0});
    smooth.push_back({x, ScorePoint{x}, x >= 0.0});
  }
  const KernelSpec wide{KernelShape::kTriangular, 5.0};
  CHECK(std::abs(llr_rd_estimate(Dataset(jump), 0.0, wide, 0.95).estimate - 1.0) < 1e-10);
  CHECK(std::abs(llr_rd_estimate(Dataset(smooth), 0.0, wide, 0.95).estimate) < 1e-10);
  CHECK(std::abs(llr_rd_estimate(Dataset(jump), 0.0, KernelSpec{}, 0.95).estimate - 1.0) < 1e-10);

  Dataset two_d({{0.0, ScorePoint{0.1, 0.2}, 1}, {0.0, ScorePoint{-0.1, 0.2}, 0}});
  CHECK_THROWS_AS(llr_rd_estimate(two_d, 0.0, wide, 0.95), MethodError);
}

TEST_CASE("llr on the lee design improves with n") {
  const auto lee = dgp_preset("lee");
  double err[2];
  int k = 0;
  for (std::size_t n : {1000u, 100000u}) {
    double sq = 0.0;
    for (std::uint64_t r = 0; r < 20; ++r) {
      const double e = llr_rd_estimate(simulate(lee, n, 1000 + r), 0.0, KernelSpec{}, 0.95).estimate - 0.04;
      sq += e * e;
    }
    err[k++] = std::sqrt(sq / 20.0);  // rmse
  }
  CHECK(err[1] < err[0]);
}
