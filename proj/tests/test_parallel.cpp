#include <omp.h>

#include <set>

#include "doctest.h"
#include "kamamsr/backtest.hpp"
#include "kamamsr/calibrate.hpp"
#include "kamamsr/msr.hpp"
#include "kamamsr/parallel.hpp"
#include "kamamsr/synth.hpp"

using namespace kamamsr;

namespace {

struct Threads {
  int saved;
  explicit Threads(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~Threads() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("derive_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s)
    for (std::uint64_t k = 0; k < 50; ++k) seen.insert(derive_seed(s, k));
  CHECK(seen.size() == 2500);
  static_assert(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("parallel EM restarts match the serial reference bit for bit") {
  Threads t(4);
  const auto path = sample_path(three_state_truth(), 1500, 8);
  EmConfig cfg;
  cfg.seed = 3;
  cfg.restarts = 8;
  const auto s = em_fit(path.returns, 3, cfg, Execution::Serial);
  const auto p = em_fit(path.returns, 3, cfg, Execution::Parallel);
  CHECK(s.log_likelihood == p.log_likelihood);
  CHECK(s.best_restart == p.best_restart);
  CHECK(s.params.sigma == p.params.sigma);
  CHECK(s.params.transition == p.params.transition);
  CHECK(s.smoothed == p.smoothed);
  for (std::size_t i = 0; i < s.runs.size(); ++i)
    CHECK(s.runs[i].log_likelihood_trace == p.runs[i].log_likelihood_trace);
}

TEST_CASE("parallel calibration trials match the serial reference") {
  Threads t(4);
  const auto a = synthesize(Scenario::TrendRegimes, 1500, 9);
  std::vector<double> p_low(a.prices.closes.size(), std::nan(""));
  for (std::size_t d = 2; d < p_low.size(); ++d) p_low[d] = a.states[d - 1] == 0 ? 0.8 : 0.3;
  SearchConfig cfg;
  cfg.n_trials = 12;
  cfg.seed = 4;
  const auto s = random_search(a.prices.closes, p_low, cfg, Execution::Serial);
  const auto p = random_search(a.prices.closes, p_low, cfg, Execution::Parallel);
  CHECK(s.best.trial == p.best.trial);
  for (std::size_t i = 0; i < s.trials.size(); ++i) {
    CHECK(s.trials[i].cv_score == p.trials[i].cv_score);
    CHECK(s.trials[i].per_fold_scores == p.trials[i].per_fold_scores);
  }
}

TEST_CASE("parallel weight draws match the serial reference") {
  Threads t(4);
  const auto a = synthesize(Scenario::TwoState, 1000, 10);
  const auto r = log_returns(std::span<const double>(a.prices.closes));
  const std::vector<double> cash(r.size(), 0.0001);
  std::vector<int> act(r.size());
  for (std::size_t j = 0; j < r.size(); ++j) act[j] = a.states[j] == 0 ? 1 : 0;
  const auto ranges = runs(act);
  OptimizeConfig cfg;
  cfg.seed = 6;
  cfg.n_draws = 400;
  const auto costs = CostSchedule::defaults()[AssetClass::Commodities];
  const auto s = optimize_weights(r, cash, act, ranges, {}, costs, cfg, Execution::Serial);
  const auto p = optimize_weights(r, cash, act, ranges, {}, costs, cfg, Execution::Parallel);
  CHECK(s.best_draw == p.best_draw);
  for (std::size_t i = 0; i < s.draws.size(); ++i) {
    CHECK(s.draws[i].asr == p.draws[i].asr);
    CHECK(s.draws[i].annual_return == p.draws[i].annual_return);
  }
}
