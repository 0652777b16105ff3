// Acceptance checks. Prints one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include "rdforest/dataset_io.hpp"
#include "rdforest/dgp.hpp"
#include "rdforest/error.hpp"
#include "rdforest/forest.hpp"
#include "rdforest/local_linear.hpp"
#include "rdforest/mc.hpp"
#include "rdforest/random.hpp"
#include "rdforest/rd.hpp"
#include "rdforest/score_transform.hpp"

using namespace rdforest;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  if (!ok) ++failures;
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(double v) { return format_short(v); }

RDMethodConfig forest_method(RDMethod m, std::size_t trees) {
  auto cfg = RDMethodConfig::defaults(m);
  cfg.forest.num_trees = trees;
  cfg.forest.c_scale = 0.4;
  return cfg;
}

void criterion1() {
  MCConfig cfg;
  cfg.dgp = dgp_preset("lee");
  cfg.x_c = ScorePoint{0.0};
  cfg.methods = {MethodEntry::builtin(forest_method(RDMethod::kRf, 1000)),
                 MethodEntry::builtin(forest_method(RDMethod::kLlf, 1000))};
  cfg.sample_sizes = {5000};
  cfg.replications = 200;
  cfg.master_seed = 20240601;
  const auto t0 = Clock::now();
  const auto res = run_mc(cfg);
  const double elapsed = seconds_since(t0);
  const auto& rf = res.rows[0];
  const auto& llf = res.rows[1];
  const bool rf_ok = std::abs(rf.mean_bias) <= 0.02 && rf.coverage >= 0.88 && rf.coverage <= 0.99;
  const bool llf_ok = std::abs(llf.mean_bias) <= 0.02 && llf.coverage >= 0.85 && llf.coverage <= 0.99;
  const bool time_ok = elapsed <= 20 * 60;
  report(1, rf_ok && llf_ok && time_ok,
         "lee n=5000 R=200 B=1000: rf bias " + fmt(rf.mean_bias) + " coverage " + fmt(rf.coverage) +
             " (failures " + std::to_string(rf.failures) + "); llf bias " + fmt(llf.mean_bias) + " coverage " +
             fmt(llf.coverage) + " (failures " + std::to_string(llf.failures) + "); " + fmt(elapsed) + " s on " +
             std::to_string(std::thread::hardware_concurrency()) + " hardware threads");
}

void criterion2() {
  MCConfig cfg;
  cfg.dgp = dgp_preset("lee");
  cfg.x_c = ScorePoint{0.0};
  cfg.methods = {MethodEntry::builtin(forest_method(RDMethod::kRf, 1000))};
  cfg.sample_sizes = {1000, 20000};
  cfg.replications = 100;
  cfg.master_seed = 777;
  const auto res = run_mc(cfg);
  const double small = std::abs(res.rows[0].mean_bias), large = std::abs(res.rows[1].mean_bias);
  report(2, large < small, "rf |bias| at n=1000 " + fmt(small) + ", at n=20000 " + fmt(large));
}

void criterion3() {
  const auto sq = dgp_preset("square2d");
  const Dataset data = simulate(sq, 1000000, 314);
  const auto s = collapse_scores(data, {ScorePoint{0.0, 0.0}, 1.0, sq.rule});
  const double oracle = std::numbers::pi * 0.05 * 0.05 / 4.0;
  const double mass = empirical_abs_mass(s, 0.0, 0.05);
  const auto collapsed = zero_density_diagnostic(s);

  Rng rng(271);
  std::vector<double> flat(1000000);
  for (auto& v : flat) v = rng.uniform(-1.0, 1.0);
  const auto uni = zero_density_diagnostic(flat);

  const bool ok = std::abs(mass - oracle) <= 0.05 * oracle && collapsed.flagged && !uni.flagged;
  report(3, ok,
         "mass in [0,0.05] " + fmt(mass) + " vs " + fmt(oracle) + "; collapsed flagged=" +
             std::to_string(collapsed.flagged) + " (ratio " + fmt(std::min(collapsed.positive.ratio, collapsed.negative.ratio)) +
             "); flat flagged=" + std::to_string(uni.flagged) + " (ratio " +
             fmt(std::min(uni.positive.ratio, uni.negative.ratio)) + ")");
}

void criterion4() {
  auto uniform_joint = [](double a, double b) { return (std::abs(a) <= 1.0 && std::abs(b) <= 1.0) ? 0.25 : 0.0; };
  auto gaussian_joint = [](double a, double b) { return std::exp(-(a * a + b * b) / 2.0) / (2.0 * std::numbers::pi); };
  auto ubounds = [](double e) { const double u = std::min(e, 1.0); return std::make_pair(-u, u); };
  auto gbounds = [](double e) { return std::make_pair(-e, e); };
  const ScorePoint c{0.0, 0.0};
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (double e : {0.25, 0.5, 0.9}) {
    // Oracles: pi e / 2 on [0, 1]; Rayleigh density with sigma = 1.
    worst = std::max(worst, std::abs(prop1_marginal_by_quadrature(uniform_joint, c, e, ubounds, 512) -
                                     std::numbers::pi * e / 2.0));
    worst = std::max(worst, std::abs(prop1_marginal_by_quadrature(gaussian_joint, c, e, gbounds, 512) -
                                     e * std::exp(-e * e / 2.0)));
  }
  const double elapsed = seconds_since(t0);
  report(4, worst < 1e-6 && elapsed < 1.0,
         "max abs error " + fmt(worst) + " with 512 nodes in " + fmt(elapsed) + " s");
}

void criterion5() {
  Rng rng(55);
  double w_err = 0.0, avg_err = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 500 + rng.index(1000), d = 1 + rng.index(2);
    std::vector<double> y(n), x(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x[i * d + j] = rng.uniform(-1.0, 1.0);
      y[i] = std::sin(3.0 * x[i * d]) + 0.3 * rng.normal();
    }
    auto data = std::make_shared<const Dataset>(d, y, x, std::vector<std::uint8_t>(n, 0));
    ForestConfig cfg;
    cfg.num_trees = 100;
    cfg.mtry = d;
    cfg.seed = static_cast<std::uint64_t>(rep);
    const auto forest = fit_forest(data, cfg, ForestVariant::kRf);
    std::vector<double> q(d);
    for (auto& v : q) v = rng.uniform(-0.9, 0.9);
    const auto w = forest_weights(forest, q);
    w_err = std::max(w_err, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
    avg_err = std::max(avg_err, std::abs(rf_predict(forest, q) - rf_predict_tree_average(forest, q)));
  }

  // Ridge limit and exact linear signal.
  const std::size_t n = 1000;
  std::vector<double> y(n), yl(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform(-1.0, 1.0);
    y[i] = std::sin(3.0 * x[i]) + 0.3 * rng.normal();
    yl[i] = 2.0 + 3.0 * x[i];
  }
  ForestConfig cfg;
  cfg.num_trees = 200;
  cfg.split_rule = SplitRule::kRidgeResidual;
  const auto noisy = fit_forest(std::make_shared<const Dataset>(1, y, x, std::vector<std::uint8_t>(n, 0)), cfg,
                                ForestVariant::kLlf);
  const auto lin = fit_forest(std::make_shared<const Dataset>(1, yl, x, std::vector<std::uint8_t>(n, 0)), cfg,
                              ForestVariant::kLlf);
  const double q[] = {0.35};
  const double ridge_err = std::abs(llf_predict(noisy, q, 1e12) - rf_predict(noisy, q));
  const double lin_err = std::abs(llf_predict(lin, q, 0.0) - (2.0 + 3.0 * 0.35));

  std::vector<LabeledSample> rows;
  for (int i = 0; i < 500; ++i) {
    const double s = rng.uniform(-1.0, 1.0);
    rows.push_back({(s >= 0.0 ? 1.0 : 0.0) + 0.5 * s, ScorePoint{s}, s >= 0.0});
  }
  const double jump_err =
      std::abs(llr_rd_estimate(Dataset(rows), 0.0, KernelSpec{KernelShape::kTriangular, 0.5}, 0.95).estimate - 1.0);

  report(5, w_err <= 1e-12 && avg_err <= 1e-12 && ridge_err <= 1e-6 && lin_err <= 1e-10 && jump_err <= 1e-10,
         "sum W - 1 " + fmt(w_err) + "; rf vs tree average " + fmt(avg_err) + "; llf(1e12) vs rf " + fmt(ridge_err) +
             "; llf(0) linear " + fmt(lin_err) + "; llr jump " + fmt(jump_err));
}

void criterion6() {
  const double rf = 1.0 / (1.0 + std::log(1.0 - 0.05) / std::log(0.05));
  const double llf = 1.0 - 1.0 / (1.0 + (1.0 / 1.3) * std::log(0.05) / std::log(1.0 - 0.05));
  const double brf = beta_min(1, 1, 0.05, ForestVariant::kRf);
  const double bllf = beta_min(1, 1, 0.05, ForestVariant::kLlf);
  const bool ok = std::abs(brf - rf) < 1e-6 && std::abs(bllf - llf) < 1e-6 && std::abs(brf - 0.983166) < 1e-6 &&
                  std::abs(bllf - 0.978226) < 1e-6;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "beta_rf %.6f, beta_llf %.6f, s(n=1000, c=0.4) = %zu", brf, bllf,
                subsample_size(1000, 1, 1, 0.05, 0.4, ForestVariant::kRf));
  report(6, ok, buf);
}

void criterion7() {
  auto make = [](CustomEstimator est) {
    MCConfig cfg;
    cfg.dgp = dgp_preset("lee");
    cfg.x_c = ScorePoint{0.0};
    cfg.methods = {MethodEntry::custom("injected", std::move(est))};
    cfg.sample_sizes = {30};
    cfg.replications = 10000;
    cfg.master_seed = 99;
    return cfg;
  };
  const double truth = true_effect(dgp_preset("lee"), ScorePoint{0.0});
  const auto normal = run_mc(make([truth](const Dataset&, const BoundaryPoint&, std::uint64_t seed) {
    Rng rng(seed);
    return EstimateReport::make(truth + rng.normal(), 1.0, 0.95, 1, 1);
  }));
  const auto oracle = run_mc(make([truth](const Dataset&, const BoundaryPoint&, std::uint64_t) {
    return EstimateReport::make(truth, 1.0, 0.95, 1, 1);
  }));
  const double cov = normal.rows[0].coverage;
  const bool ok = std::abs(cov - 0.95) <= 0.007 && oracle.rows[0].mean_bias == 0.0 && oracle.rows[0].coverage == 1.0;
  report(7, ok, "calibrated coverage " + fmt(cov) + "; oracle bias " + fmt(oracle.rows[0].mean_bias) +
                    " coverage " + fmt(oracle.rows[0].coverage));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion8() {
  const fs::path dir = fs::temp_directory_path() / ("rdforest_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cli = RDFOREST_CLI;
  std::ofstream(dir / "study.json") << R"({"dgp":"lee","boundary_point":[0],
    "methods":[{"method":"rf","trees":100},{"method":"llf","trees":100},"llr"],
    "sample_sizes":[1000,3000],"replications":8,"seed":4242})";
  const std::string study = (dir / "study.json").string();
  int rc = 0;
  rc |= shell(cli + " --threads 1 mc --config " + study + " --out " + (dir / "t1.csv").string());
  rc |= shell(cli + " --threads 8 mc --config " + study + " --out " + (dir / "t8.csv").string());
  rc |= shell(cli + " dgp sample --preset lee --n 50000 --seed 7 --out " + (dir / "a.csv").string());
  rc |= shell(cli + " --threads 3 dgp sample --preset lee --n 50000 --seed 7 --out " + (dir / "b.csv").string());
  const std::string t1 = slurp(dir / "t1.csv"), t8 = slurp(dir / "t8.csv");
  const std::string a = slurp(dir / "a.csv"), b = slurp(dir / "b.csv");
  const bool ok = rc == 0 && !t1.empty() && t1 == t8 && !a.empty() && a == b;
  report(8, ok, std::string("mc threads 1 vs 8 ") + (t1 == t8 ? "identical" : "differ") + " (" +
                    std::to_string(t1.size()) + " bytes); dgp sample runs " + (a == b ? "identical" : "differ") +
                    " (" + std::to_string(a.size()) + " bytes)");
  fs::remove_all(dir);
}

void criterion9() {
  const auto lee = dgp_preset("lee");
  const Dataset data = simulate(lee, 4000, 8080);
  const BoundaryPoint c(ScorePoint{0.0}, lee.rule);
  double worst = 0.0;
  for (RDMethod m : {RDMethod::kRf, RDMethod::kLlf, RDMethod::kLlr}) {
    auto cfg = RDMethodConfig::defaults(m);
    cfg.forest.num_trees = 500;
    const double base = estimate_at(fit_rd(data, lee.rule, cfg), c).estimate;
    for (double shift : {0.25, -1.0, 7.5}) {
      const Dataset moved = data.with_outcomes([&](std::size_t i, double y) { return data.treatment(i) ? y + shift : y; });
      worst = std::max(worst, std::abs(estimate_at(fit_rd(moved, lee.rule, cfg), c).estimate - base - shift));
    }
  }
  report(9, worst <= 1e-12, "max |shifted - base - c| over rf, llf, llr: " + fmt(worst));
}

}  // namespace

int main() {
  guarded(6, criterion6);
  guarded(4, criterion4);
  guarded(5, criterion5);
  guarded(7, criterion7);
  guarded(9, criterion9);
  guarded(3, criterion3);
  guarded(8, criterion8);
  guarded(2, criterion2);
  guarded(1, criterion1);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
