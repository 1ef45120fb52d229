#include <benchmark/benchmark.h>

#include "kamamsr/backtest.hpp"
#include "kamamsr/calibrate.hpp"
#include "kamamsr/msr.hpp"
#include "kamamsr/synth.hpp"

using namespace kamamsr;

namespace {

Execution mode(const benchmark::State& s) { return s.range(0) ? Execution::Parallel : Execution::Serial; }

void BM_EmFit(benchmark::State& state) {
  const auto path = sample_path(two_state_truth(), 3000, 1);
  EmConfig cfg;
  cfg.seed = 2;
  for (auto _ : state) benchmark::DoNotOptimize(em_fit(path.returns, 2, cfg, mode(state)).log_likelihood);
}

void BM_RandomSearch(benchmark::State& state) {
  const auto a = synthesize(Scenario::TrendRegimes, 3000, 3);
  std::vector<double> p_low(a.prices.closes.size(), std::nan(""));
  for (std::size_t d = 2; d < p_low.size(); ++d) p_low[d] = a.states[d - 1] == 0 ? 0.9 : 0.1;
  SearchConfig cfg;
  cfg.seed = 4;
  for (auto _ : state) benchmark::DoNotOptimize(random_search(a.prices.closes, p_low, cfg, mode(state)).best.cv_score);
}

void BM_OptimizeWeights(benchmark::State& state) {
  const auto a = synthesize(Scenario::TwoState, 3000, 5);
  const auto r = log_returns(std::span<const double>(a.prices.closes));
  const std::vector<double> cash(r.size(), 0.0);
  std::vector<int> act(r.size());
  for (std::size_t j = 0; j < r.size(); ++j) act[j] = a.states[j] == 0 ? 1 : 0;
  const auto ranges = runs(act);
  OptimizeConfig cfg;
  cfg.seed = 6;
  const auto costs = CostSchedule::defaults()[AssetClass::Equities];
  for (auto _ : state)
    benchmark::DoNotOptimize(optimize_weights(r, cash, act, ranges, {}, costs, cfg, mode(state)).best_draw);
}

}  // namespace

BENCHMARK(BM_EmFit)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomSearch)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OptimizeWeights)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
