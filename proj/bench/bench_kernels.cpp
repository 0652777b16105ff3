// Serial reference vs OpenMP kernels.
#include <memory>

#include <benchmark/benchmark.h>

#include "rdforest/dgp.hpp"
#include "rdforest/forest.hpp"
#include "rdforest/mc.hpp"
#include "rdforest/random.hpp"
#include "rdforest/score_transform.hpp"

using namespace rdforest;

namespace {

std::shared_ptr<const Dataset> lee_data(std::size_t n) {
  return std::make_shared<const Dataset>(simulate(dgp_preset("lee"), n, 1));
}

template <bool Serial>
void BM_FitForest(benchmark::State& state) {
  const auto data = lee_data(static_cast<std::size_t>(state.range(0)));
  ForestConfig cfg;
  cfg.num_trees = 500;
  for (auto _ : state) {
    auto f = Serial ? fit_forest_serial(data, cfg, ForestVariant::kRf) : fit_forest(data, cfg, ForestVariant::kRf);
    benchmark::DoNotOptimize(f.trees().data());
  }
}

template <bool Serial>
void BM_Simulate(benchmark::State& state) {
  const auto spec = dgp_preset("square2d");
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto d = Serial ? simulate_serial(spec, n, 3) : simulate(spec, n, 3);
    benchmark::DoNotOptimize(d.outcomes().data());
  }
}

template <bool Serial>
void BM_Diagnostic(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  for (auto& v : s) v = rng.uniform(-1.0, 1.0);
  const auto ref = zero_density_diagnostic(s);
  for (auto _ : state) {
    auto r = Serial ? zero_density_diagnostic_serial(s, ref.bins, ref.window, ref.threshold)
                    : zero_density_diagnostic(s, ref.bins, ref.window, ref.threshold);
    benchmark::DoNotOptimize(r);
  }
}

template <bool Serial>
void BM_MonteCarlo(benchmark::State& state) {
  MCConfig cfg;
  cfg.dgp = dgp_preset("lee");
  cfg.x_c = ScorePoint{0.0};
  auto rf = RDMethodConfig::defaults(RDMethod::kRf);
  rf.forest.num_trees = 100;
  cfg.methods = {MethodEntry::builtin(rf)};
  cfg.sample_sizes = {2000};
  cfg.replications = 16;
  for (auto _ : state) {
    auto r = Serial ? run_mc_serial(cfg) : run_mc(cfg);
    benchmark::DoNotOptimize(r.rows.data());
  }
}

}  // namespace

BENCHMARK(BM_FitForest<true>)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitForest<false>)->Arg(5000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Simulate<true>)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Simulate<false>)->Arg(1 << 20)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Diagnostic<true>)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Diagnostic<false>)->Arg(1 << 20)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarlo<true>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarlo<false>)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
